//! Plain-text channel realization files.
//!
//! ```text
//! # hybd-channel-dump v1
//! channel_kind rayleigh
//! master_seed 2016
//! trial 0
//! users 2
//! n_ms 4
//! n_bs 16
//! beta 0.91 1.27
//! user 0
//! <n_ms lines of n_bs interleaved "re im" pairs>
//! user 1
//! ...
//! ```
//!
//! Entries are the unnormalized `sqrt(beta_k) * H_k`, written with
//! shortest round-trip decimals so reading a file reproduces it exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hybd_core::channel::MultiUserChannel;
use hybd_core::linalg::{CMatrix, C64};
use hybd_core::scenario::{sample_channel, ScenarioConfig};

use crate::error::{Result, SimError};

pub const DUMP_HEADER: &str = "# hybd-channel-dump v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDump {
    pub channel_kind: String,
    pub master_seed: u64,
    pub trial: u64,
    pub large_scale: Vec<f64>,
    pub per_user_matrix: Vec<CMatrix>,
}

impl ChannelDump {
    pub fn from_channel(kind: &str, master_seed: u64, trial: u64, channel: &MultiUserChannel) -> Self {
        ChannelDump {
            channel_kind: kind.to_string(),
            master_seed,
            trial,
            large_scale: channel.large_scale.clone(),
            per_user_matrix: channel.per_user_matrix.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let (n_ms, n_bs) = self.per_user_matrix.first().map_or((0, 0), |h| h.shape());
        let mut s = String::new();
        let betas: Vec<String> = self.large_scale.iter().map(|b| format!("{b:?}")).collect();
        writeln!(s, "{DUMP_HEADER}").unwrap();
        writeln!(s, "channel_kind {}", self.channel_kind).unwrap();
        writeln!(s, "master_seed {}", self.master_seed).unwrap();
        writeln!(s, "trial {}", self.trial).unwrap();
        writeln!(s, "users {}", self.per_user_matrix.len()).unwrap();
        writeln!(s, "n_ms {n_ms}").unwrap();
        writeln!(s, "n_bs {n_bs}").unwrap();
        writeln!(s, "beta {}", betas.join(" ")).unwrap();
        for (k, h) in self.per_user_matrix.iter().enumerate() {
            writeln!(s, "user {k}").unwrap();
            for row in h.row_iter() {
                let line: Vec<String> = row.iter().map(|z| format!("{:?} {:?}", z.re, z.im)).collect();
                writeln!(s, "{}", line.join(" ")).unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| SimError::Dump { path: path.to_path_buf(), reason };
        let mut lines = text.lines();
        if lines.next() != Some(DUMP_HEADER) {
            return Err(bad(format!("expected header line {DUMP_HEADER:?}")));
        }
        let field = |lines: &mut std::str::Lines, key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ if line == key => Ok(String::new()),
                _ => Err(bad(format!("expected {key}, found {line:?}"))),
            }
        };
        let int = |v: String, key: &str| v.parse::<u64>().map_err(|e| bad(format!("{key}: {e}")));
        let channel_kind = field(&mut lines, "channel_kind")?;
        let master_seed = int(field(&mut lines, "master_seed")?, "master_seed")?;
        let trial = int(field(&mut lines, "trial")?, "trial")?;
        let users = int(field(&mut lines, "users")?, "users")? as usize;
        let n_ms = int(field(&mut lines, "n_ms")?, "n_ms")? as usize;
        let n_bs = int(field(&mut lines, "n_bs")?, "n_bs")? as usize;
        let large_scale = field(&mut lines, "beta")?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(format!("beta: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if large_scale.len() != users {
            return Err(bad(format!("{} betas for {users} users", large_scale.len())));
        }
        let mut per_user_matrix = Vec::with_capacity(users);
        for k in 0..users {
            if field(&mut lines, "user")? != k.to_string() {
                return Err(bad(format!("expected block for user {k}")));
            }
            let mut entries = Vec::with_capacity(n_ms * n_bs);
            for r in 0..n_ms {
                let line = lines.next().ok_or_else(|| bad(format!("user {k}: missing row {r}")))?;
                let values = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|e| bad(format!("user {k} row {r}: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if values.len() != 2 * n_bs {
                    return Err(bad(format!("user {k} row {r}: {} numbers, expected {}", values.len(), 2 * n_bs)));
                }
                entries.extend(values.chunks(2).map(|p| C64::new(p[0], p[1])));
            }
            per_user_matrix.push(CMatrix::from_row_slice(n_ms, n_bs, &entries));
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing content".into()));
        }
        Ok(ChannelDump { channel_kind, master_seed, trial, large_scale, per_user_matrix })
    }
}

pub fn read_channel_dump(path: &Path) -> Result<ChannelDump> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    ChannelDump::parse(&text, path)
}

/// Write one file per trial realization of `config` into `dir`.
pub fn dump_channels(config: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    (0..config.trials as u64)
        .map(|trial| {
            let channel = sample_channel(config, trial)?;
            let dump = ChannelDump::from_channel(config.channel_kind.label(), config.master_seed, trial, &channel);
            let path = dir.join(format!("channel_{trial:05}.txt"));
            std::fs::write(&path, dump.to_text()).map_err(|e| SimError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
