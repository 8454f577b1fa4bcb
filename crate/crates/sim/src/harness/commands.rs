use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use secagg_core::protocol::JoinLevel;
use secagg_core::wire::MsgType;
use secagg_core::{Bls12G1, Error, Group, TinyGroup};

use super::config::{ExperimentConfig, GroupBackend};
use crate::adversary::{try_open_key, AdversaryScript};
use crate::error::SimError;
use crate::metrics::{EntityKind, Metrics, Outcome, Phase};
use crate::session::{IterationReport, Session};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_ATTACK: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackScenario {
    /// The `split` highest-id decryptors see one survivor moved to the dropouts.
    InconsistentSets { split: Option<usize> },
    /// The upper half of the selected clients, and the decryptors among them, get a
    /// different model digest.
    InconsistentModel,
}

/// Output path for trial `k` of `trials`: `runs.csv` becomes `runs-trial3.csv`.
pub fn trial_path(out: &Path, k: usize, trials: usize) -> PathBuf {
    if trials == 1 {
        return out.to_path_buf();
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-trial{k}.{ext}"),
        None => format!("{stem}-trial{k}"),
    };
    out.with_file_name(name)
}

fn write_csv(metrics: &Metrics, path: &Path) -> Result<(), SimError> {
    let file = File::create(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    metrics.write_csv(BufWriter::new(file)).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
}

/// Mean bytes and CPU per entity and iteration, by phase and role.
pub fn summary_table(metrics: &Metrics) -> String {
    #[derive(Default)]
    struct Acc {
        ids: BTreeSet<u64>,
        rows: u64,
        sent: u64,
        recv: u64,
        cpu: u64,
    }
    let mut groups: BTreeMap<(Phase, EntityKind), Acc> = BTreeMap::new();
    for r in metrics.rows() {
        let a = groups.entry((r.phase, r.entity_kind)).or_default();
        a.ids.insert(r.entity_id);
        a.rows += 1;
        a.sent += r.bytes_sent;
        a.recv += r.bytes_recv;
        a.cpu += r.cpu_us;
    }
    let mut out = format!(
        "{:<11} {:<10} {:>8} {:>14} {:>14} {:>10}\n",
        "phase", "role", "entities", "bytes_sent", "bytes_recv", "cpu_us"
    );
    for ((phase, kind), a) in groups {
        let n = a.rows.max(1) as f64;
        out += &format!(
            "{:<11} {:<10} {:>8} {:>14.1} {:>14.1} {:>10.1}\n",
            phase.as_str(),
            kind.as_str(),
            a.ids.len(),
            a.sent as f64 / n,
            a.recv as f64 / n,
            a.cpu as f64 / n
        );
    }
    out
}

fn outcome_line<G: Group>(reports: &[IterationReport<G>]) -> String {
    let count = |o: Outcome| reports.iter().filter(|r| r.outcome == o).count();
    format!(
        "{} iterations: sum_ok {}, abort {}, wrong_sum {}",
        reports.len(),
        count(Outcome::SumOk),
        count(Outcome::Abort),
        count(Outcome::WrongSum)
    )
}

fn io(e: io::Error) -> SimError {
    SimError::Config(format!("output: {e}"))
}

/// Runs `trials` independent sessions of `iters` honest iterations each.
pub fn cmd_run(cfg: &ExperimentConfig, log: &mut dyn Write) -> Result<i32, SimError> {
    match cfg.group {
        GroupBackend::Bls => run_with::<Bls12G1>(cfg, log),
        GroupBackend::Tiny => run_with::<TinyGroup>(cfg, log),
    }
}

fn run_with<G: Group>(cfg: &ExperimentConfig, log: &mut dyn Write) -> Result<i32, SimError> {
    let mut code = EXIT_OK;
    for k in 0..cfg.trials {
        let seed = cfg.seed + k as u64;
        let mut session = Session::<G>::start(cfg.session_config(seed))?;
        let reports = session.run_session(cfg.iters, cfg.dropout, &AdversaryScript::Honest)?;
        if let Some(out) = &cfg.out {
            write_csv(session.metrics(), &trial_path(out, k, cfg.trials))?;
        }
        writeln!(log, "trial {k} (seed {seed}): {}", outcome_line(&reports)).map_err(io)?;
        for r in reports.iter().filter(|r| r.outcome != Outcome::SumOk) {
            writeln!(log, "  iteration {}: {} {}", r.t, r.outcome.as_str(), r.error.as_deref().unwrap_or(""))
                .map_err(io)?;
            code = EXIT_ABORT;
        }
        write!(log, "{}", summary_table(session.metrics())).map_err(io)?;
    }
    Ok(code)
}

pub fn cmd_attack(cfg: &ExperimentConfig, scenario: AttackScenario, log: &mut dyn Write) -> Result<i32, SimError> {
    match cfg.group {
        GroupBackend::Bls => attack_with::<Bls12G1>(cfg, scenario, log),
        GroupBackend::Tiny => attack_with::<TinyGroup>(cfg, scenario, log),
    }
}

fn ids(set: &[u64]) -> String {
    let v: Vec<String> = set.iter().map(u64::to_string).collect();
    format!("{{{}}}", v.join(","))
}

fn attack_with<G: Group>(
    cfg: &ExperimentConfig,
    scenario: AttackScenario,
    log: &mut dyn Write,
) -> Result<i32, SimError> {
    let mut session = Session::<G>::start(cfg.session_config(cfg.seed))?;
    let t = session.next_iteration();
    let dropped = session.dropouts(t, cfg.dropout)?;
    let holds =
        match scenario {
            AttackScenario::InconsistentSets { split } => {
                let decs: Vec<u64> = session.decryptors().keys().copied().collect();
                let k = split.unwrap_or(decs.len() / 2).min(decs.len());
                let (a, b) = decs.split_at(decs.len() - k);
                let script = AdversaryScript::InconsistentSets { partition: b.iter().copied().collect(), moved: 1 };
                let report = session.run_iteration(&script, &dropped)?;
                let kappa = session.template().threshold;
                writeln!(log, "inconsistent-sets: κ={kappa}, view A to {}, view B to {}", ids(a), ids(b))
                    .map_err(io)?;
                let mut holds = true;
                let mut opened_views = 0;
                for (name, part, other) in [("A", a, b), ("B", b, a)] {
                    let expect = part.len() > kappa;
                    let mut same = Vec::new();
                    let mut cross = Vec::new();
                    for &u in part {
                        let own: Vec<u64> = part.iter().copied().filter(|&i| i != u).take(kappa).collect();
                        if own.len() == kappa {
                            same.push(try_open_key(t, &report.responses, u, &own).unwrap_or(false));
                        } else {
                            same.push(false);
                        }
                        if let Some(&x) = other.first() {
                            let mut mixed: Vec<u64> =
                                part.iter().copied().filter(|&i| i != u).take(kappa - 1).collect();
                            mixed.push(x);
                            if mixed.len() == kappa {
                                cross.push(try_open_key(t, &report.responses, u, &mixed).unwrap_or(false));
                            }
                        }
                    }
                    let all_open = !same.is_empty() && same.iter().all(|&o| o);
                    let none_open = same.iter().all(|&o| !o);
                    let cross_open = cross.iter().any(|&o| o);
                    opened_views += all_open as usize;
                    writeln!(
                    log,
                    "  view {name}: {} decryptors, keys recovered with same-view helpers: {}, with mixed helpers: {}",
                    part.len(),
                    if all_open { "all" } else if none_open { "none" } else { "some" },
                    if cross_open { "some" } else { "none" }
                )
                    .map_err(io)?;
                    holds &= if expect { all_open } else { none_open };
                    holds &= !cross_open;
                }
                holds &= opened_views <= 1;
                if opened_views == 0 {
                    holds &= report.outcome == Outcome::Abort;
                }
                writeln!(
                    log,
                    "  masks recoverable for {} view(s); server outcome {}",
                    opened_views,
                    report.outcome.as_str()
                )
                .map_err(io)?;
                holds
            }
            AttackScenario::InconsistentModel => {
                let selected = session.selected(t)?;
                let partition: BTreeSet<u64> = selected[selected.len() / 2..].iter().copied().collect();
                let mut digest = session.model_digest(t);
                digest.iter_mut().for_each(|b| *b = !*b);
                let script = AdversaryScript::InconsistentModel { partition: partition.clone(), digest };
                let report = session.run_iteration(&script, &dropped)?;
                writeln!(
                    log,
                    "inconsistent-model: {} of {} selected clients told a different model; outcome {}{}",
                    partition.len(),
                    selected.len(),
                    report.outcome.as_str(),
                    report.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                )
                .map_err(io)?;
                report.outcome != Outcome::SumOk
            }
        };
    if let Some(out) = &cfg.out {
        write_csv(session.metrics(), out)?;
    }
    writeln!(log, "assertion {}", if holds { "held" } else { "FAILED" }).map_err(io)?;
    Ok(if holds { EXIT_OK } else { EXIT_ATTACK })
}

/// Adds `new_clients` clients and then a level of `new_decryptors` promoted clients with
/// threshold `level_threshold` (default: one more than the current holder count), then
/// runs `iters` more iterations.
pub fn cmd_join(
    cfg: &ExperimentConfig,
    new_clients: usize,
    new_decryptors: usize,
    level_threshold: Option<usize>,
    log: &mut dyn Write,
) -> Result<i32, SimError> {
    match cfg.group {
        GroupBackend::Bls => join_with::<Bls12G1>(cfg, new_clients, new_decryptors, level_threshold, log),
        GroupBackend::Tiny => join_with::<TinyGroup>(cfg, new_clients, new_decryptors, level_threshold, log),
    }
}

fn join_with<G: Group>(
    cfg: &ExperimentConfig,
    new_clients: usize,
    new_decryptors: usize,
    level_threshold: Option<usize>,
    log: &mut dyn Write,
) -> Result<i32, SimError> {
    let mut sc = cfg.session_config(cfg.seed);
    sc.retain_dealers = true;
    let mut session = Session::<G>::start(sc)?;
    let mut reports = session.run_session(1, cfg.dropout, &AdversaryScript::Honest)?;
    let mut ok = true;
    if new_clients > 0 {
        let added = session.join_clients(new_clients)?;
        writeln!(log, "joined clients {}", ids(&added)).map_err(io)?;
    }
    if new_decryptors > 0 {
        let holders = session.decryptors().len();
        let members: Vec<u64> = session
            .clients()
            .keys()
            .copied()
            .filter(|i| !session.decryptors().contains_key(i))
            .take(new_decryptors)
            .collect();
        if members.len() < new_decryptors {
            return Err(SimError::Config(format!("only {} clients can be promoted", members.len())));
        }
        let level = JoinLevel { members: members.clone(), threshold: level_threshold.unwrap_or(holders + 1) };
        let before = session.metrics().messages.len();
        let existing: Vec<u64> = session.decryptors().keys().copied().collect();
        match session.join_decryptors(&level) {
            Err(SimError::Protocol(e @ Error::DegenerateExtension { .. })) => {
                writeln!(log, "decryptor level rejected: {e}").map_err(io)?;
                return Ok(EXIT_CONFIG);
            }
            r => r?,
        }
        let joined = &session.metrics().messages[before..];
        let from_decryptors: usize = joined
            .iter()
            .filter(|m| existing.contains(&m.from) && m.sender_kind() == EntityKind::Decryptor)
            .map(|m| m.bytes)
            .sum();
        let stray =
            joined.iter().filter(|m| m.msg_type == MsgType::SeedShare && m.to != 0 && !members.contains(&m.to)).count();
        writeln!(
            log,
            "joined decryptor level {} with κ={}: {} SEEDSHARE envelopes, {} bytes from existing decryptors",
            ids(&members),
            level.threshold,
            joined.iter().filter(|m| m.msg_type == MsgType::SeedShare && m.to != 0).count(),
            from_decryptors
        )
        .map_err(io)?;
        ok &= from_decryptors == 0 && stray == 0;
    }
    reports.extend(session.run_session(cfg.iters, cfg.dropout, &AdversaryScript::Honest)?);
    for r in &reports {
        ok &= r.outcome == Outcome::SumOk;
    }
    writeln!(log, "{}", outcome_line(&reports)).map_err(io)?;
    if let Some(out) = &cfg.out {
        write_csv(session.metrics(), out)?;
    }
    Ok(if ok { EXIT_OK } else { EXIT_ABORT })
}
