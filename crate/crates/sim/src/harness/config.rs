use std::path::PathBuf;
use std::str::FromStr;

use secagg_core::protocol::{threshold_gate, AbortRule, Mode, Rate, Selection};

use crate::session::SessionConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupBackend {
    Bls,
    Tiny,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionKind {
    Static,
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Flat experiment description. Unset `threshold` and `participants` are filled in by
/// [`ExperimentConfig::finish`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub clients: usize,
    /// `n_t` in static mode.
    pub participants: Option<usize>,
    /// Selection probability `n/m` in dynamic mode.
    pub probability: (u64, u64),
    pub decryptors: usize,
    pub threshold: Option<usize>,
    pub dropout: Rate,
    pub eta_c: Rate,
    pub eta_d: Rate,
    pub len: usize,
    pub iters: usize,
    pub degree: usize,
    pub mode: Mode,
    pub selection: SelectionKind,
    pub abort_rule: AbortRule,
    pub group: GroupBackend,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub delay_ms: u64,
    pub jitter_ms: u64,
    pub full_range: bool,
    pub cpu: bool,
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            clients: 100,
            participants: None,
            probability: (1, 1),
            decryptors: 40,
            threshold: None,
            dropout: Rate::from_ppm(50_000),
            eta_c: Rate::from_ppm(0),
            eta_d: Rate::from_ppm(100_000),
            len: 16_000,
            iters: 3,
            degree: 16,
            mode: Mode::OneRound,
            selection: SelectionKind::Static,
            abort_rule: AbortRule::Quorum,
            group: GroupBackend::Bls,
            seed: 0,
            out: None,
            delay_ms: 50,
            jitter_ms: 20,
            full_range: false,
            cpu: false,
            trials: 1,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| bad(format!("{key}: cannot parse {v:?}")))
}

fn rate(key: &str, v: &str) -> Result<Rate, ConfigError> {
    Rate::from_f64(num(key, v)?).map_err(|e| bad(format!("{key}: {e}")))
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(bad(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key.trim() {
            "clients" => self.clients = num(key, v)?,
            "participants" => self.participants = Some(num(key, v)?),
            "probability" => {
                let (n, m) = v.split_once('/').ok_or_else(|| bad("probability: expected n/m"))?;
                self.probability = (num(key, n)?, num(key, m)?);
            }
            "decryptors" => self.decryptors = num(key, v)?,
            "threshold" => self.threshold = Some(num(key, v)?),
            "dropout" => self.dropout = rate(key, v)?,
            "eta_c" => self.eta_c = rate(key, v)?,
            "eta_d" => self.eta_d = rate(key, v)?,
            "len" => self.len = num(key, v)?,
            "iters" => self.iters = num(key, v)?,
            "degree" => self.degree = num(key, v)?,
            "mode" => {
                self.mode = match v {
                    "oneround" => Mode::OneRound,
                    "tss" => Mode::Tss,
                    _ => return Err(bad(format!("mode: expected oneround or tss, got {v:?}"))),
                }
            }
            "selection" => {
                self.selection = match v {
                    "static" => SelectionKind::Static,
                    "dynamic" => SelectionKind::Dynamic,
                    _ => return Err(bad(format!("selection: expected static or dynamic, got {v:?}"))),
                }
            }
            "abort_rule" => {
                self.abort_rule = match v {
                    "quorum" => AbortRule::Quorum,
                    "threshold" => AbortRule::Threshold,
                    _ => return Err(bad(format!("abort_rule: expected quorum or threshold, got {v:?}"))),
                }
            }
            "group" => {
                self.group = match v {
                    "bls" | "bls12-381" => GroupBackend::Bls,
                    "tiny" | "test" => GroupBackend::Tiny,
                    _ => return Err(bad(format!("group: expected bls or tiny, got {v:?}"))),
                }
            }
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "delay_ms" => self.delay_ms = num(key, v)?,
            "jitter_ms" => self.jitter_ms = num(key, v)?,
            "full_range" => self.full_range = flag(key, v)?,
            "cpu" => self.cpu = flag(key, v)?,
            "trials" => self.trials = num(key, v)?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key=value", no + 1)))?;
            self.set(k, v).map_err(|e| bad(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    /// Fills in derived defaults and enforces every parse-time rule.
    pub fn finish(mut self) -> Result<Self, ConfigError> {
        let threshold = *self.threshold.get_or_insert(self.decryptors / 2 + 1);
        if self.clients == 0 || self.len == 0 || self.trials == 0 {
            return Err(bad("clients, len and trials must be positive"));
        }
        if self.decryptors == 0 || self.decryptors > self.clients {
            return Err(bad(format!("decryptors must lie in [1, {}]", self.clients)));
        }
        if threshold == 0 || threshold > self.decryptors {
            return Err(bad(format!("threshold {threshold} outside [1, {}]", self.decryptors)));
        }
        if !threshold_gate(threshold, self.decryptors, self.eta_c, self.eta_d) {
            return Err(bad(format!(
                "2κ > (1 + η_C − η_D)·n_I fails: κ={threshold}, n_I={}, η_C={}, η_D={}",
                self.decryptors, self.eta_c, self.eta_d
            )));
        }
        if self.eta_c.ppm() as u64 + self.eta_d.ppm() as u64 >= Rate::ONE as u64 {
            return Err(bad("η_C + η_D must stay below 1"));
        }
        if self.dropout > self.eta_d {
            return Err(bad(format!("dropout {} exceeds η_D = {}", self.dropout, self.eta_d)));
        }
        match self.selection {
            SelectionKind::Static => {
                let n_t = *self.participants.get_or_insert(self.clients);
                if n_t == 0 || n_t > self.clients {
                    return Err(bad(format!("participants must lie in [1, {}]", self.clients)));
                }
            }
            SelectionKind::Dynamic => {
                let (n, m) = self.probability;
                if m == 0 || n > m {
                    return Err(bad(format!("selection probability {n}/{m} invalid")));
                }
            }
        }
        if self.group == GroupBackend::Tiny && self.clients > 10 {
            return Err(bad("the tiny test group supports at most 10 clients"));
        }
        Ok(self)
    }

    pub fn threshold(&self) -> usize {
        self.threshold.unwrap_or(self.decryptors / 2 + 1)
    }

    pub fn session_config(&self, seed: u64) -> SessionConfig {
        let selection = match self.selection {
            SelectionKind::Static => Selection::Static { n_t: self.participants.unwrap_or(self.clients) },
            SelectionKind::Dynamic => Selection::Dynamic { n: self.probability.0, m: self.probability.1 },
        };
        SessionConfig {
            selection,
            eta_c: self.eta_c,
            eta_d: self.eta_d,
            degree: self.degree,
            mode: self.mode,
            abort_rule: self.abort_rule,
            base_delay_ms: self.delay_ms,
            jitter_ms: self.jitter_ms,
            seed,
            measure_cpu: self.cpu,
            full_range: self.full_range,
            ..SessionConfig::new(self.clients, self.decryptors, self.threshold(), self.len)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_experiment_grid() {
        let c = ExperimentConfig::default().finish().unwrap();
        assert_eq!((c.len, c.decryptors, c.dropout.ppm()), (16_000, 40, 50_000));
        assert_eq!(c.threshold, Some(21));
        assert_eq!(c.participants, Some(100));
    }

    #[test]
    fn text_overrides_and_comments() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# grid\nclients = 20\n\ndecryptors=6 # small\nmode=tss\nprobability=1/2\n").unwrap();
        assert_eq!((c.clients, c.decryptors, c.mode, c.probability), (20, 6, Mode::Tss, (1, 2)));
        assert!(c.apply_text("clients").is_err());
        assert!(c.apply_text("colour=red").is_err());
        assert!(c.apply_text("dropout=1.5").is_err());
    }

    #[test]
    fn gate_rejects_at_parse_time() {
        let mut c = ExperimentConfig::default();
        c.apply_text("decryptors=10\nthreshold=3\neta_c=0.2\neta_d=0.2\ndropout=0").unwrap();
        let err = c.finish().unwrap_err();
        assert!(err.0.contains("2κ"), "{err}");
    }

    #[test]
    fn dropout_above_eta_d_is_rejected() {
        let mut c = ExperimentConfig::default();
        c.apply_text("dropout=0.2").unwrap();
        assert!(c.finish().is_err());
    }
}
