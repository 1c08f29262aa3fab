use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use zerodelay_core::belief::Belief;
use zerodelay_core::dobrushin::contraction_coefficient;
use zerodelay_core::eval::{
    exhaustive_quantizer_optimum, memoryless_baseline, rollout, stability_experiment,
    RolloutConfig, RolloutResult, StabilityReport,
};
use zerodelay_core::lattice::{composition_count, BeliefLattice, OccupationCounts};
use zerodelay_core::model::SystemSpec;
use zerodelay_core::qlearn::{
    lattice_policy_from_table, train as learn, window_policy_from_table, Scheme, TrainedPolicy,
};
use zerodelay_core::quantizer::QuantizerSet;
use zerodelay_core::window::{loss_estimate, LossConfig, LossEstimate, WindowCodec, WindowTable};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::persist::{
    cache_path, load_occupation, load_window_cache, save_occupation, save_window_cache,
    window_key, Checkpoint,
};
use crate::results::{self, Row};

pub fn checkpoint_path(cfg: &ExperimentConfig, n: usize) -> PathBuf {
    cfg.output_dir
        .join(format!("{}-{}-N{n}.ckpt", cfg.name, cfg.scheme.name()))
}

fn occupation_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("occ")
}

pub fn inspect(cfg: &ExperimentConfig) -> Result<String> {
    let (spec, set) = cfg.build()?;
    let r = contraction_coefficient(&spec.source, &spec.channel, &set)?;
    let mut s = String::new();
    let _ = writeln!(s, "config hash      {}", cfg.hash());
    let _ = writeln!(s, "{}", spec.describe());
    let _ = writeln!(s, "rate             {}", cfg.rate());
    let _ = writeln!(s, "quantizers       {} ({})", set.len(), set.pruning());
    let _ = writeln!(s, "delta(T)         {:.6}", r.delta_t);
    let _ = writeln!(s, "delta(O)         {:.6}", r.delta_o);
    let _ = writeln!(s, "min delta(O_Q)   {:.6}", r.tilde_delta_o);
    let _ = writeln!(s, "alpha            {:.6}", r.alpha);
    let _ = writeln!(s, "alpha (min O_Q)  {:.6}", r.alpha_sharp);
    match r.alpha_fallback {
        Some(a) => {
            let _ = writeln!(s, "alpha (1-delta)  {a:.6}");
        }
        None => {
            let _ = writeln!(s, "alpha (1-delta)  n/a, delta(T) <= 1/2");
        }
    }
    let _ = writeln!(
        s,
        "window bound     {}",
        if r.certifies_stability() {
            format!("certified, rate {:.6}", r.best_alpha())
        } else {
            "not certified".into()
        }
    );
    let zeta: Vec<String> = spec.zeta().probs().iter().map(|p| format!("{p:.6}")).collect();
    let _ = writeln!(s, "zeta             {}", zeta.join(" "));
    for &n in &cfg.n {
        let lattice = composition_count(n, spec.x_size())
            .map_or("overflow".to_string(), |c| c.to_string());
        let windows = ((set.len() * spec.mp_size()) as f64).powi(n as i32);
        let _ = writeln!(s, "N={n:<3} lattice points {lattice}, windows {windows:.4e}");
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub n: usize,
    pub checkpoint: PathBuf,
    pub summary: String,
    pub converged: bool,
}

/// Trains every N in the config (or just `only`). Checkpoints are written
/// whether or not learning converged.
pub fn train(cfg: &ExperimentConfig, only: Option<usize>) -> Result<Vec<TrainReport>> {
    let (spec, set) = cfg.build()?;
    let hash = cfg.hash();
    let ns: Vec<usize> = match only {
        Some(n) if cfg.n.contains(&n) => vec![n],
        Some(n) => return Err(CliError::Validation(format!("N={n} is not listed in the config"))),
        None => cfg.n.clone(),
    };
    let mut out = Vec::new();
    for n in ns {
        let lc = cfg.learning(n);
        let outcome = learn(spec.clone(), set.clone(), &lc)?;
        let ckpt = Checkpoint::from_table(
            &outcome.table,
            &set,
            &hash,
            cfg.scheme,
            n,
            outcome.steps,
            outcome.converged,
        );
        let path = checkpoint_path(cfg, n);
        ckpt.save(&path)?;
        if let Some(occ) = &outcome.occupation {
            save_occupation(&occupation_path(&path), &hash, occ.visits())?;
        }
        if let Some(table) = &outcome.window_table {
            let key = window_key(&spec, &set, n);
            save_window_cache(
                &cache_path(&cfg.output_dir, &key),
                &key,
                &table.reachable_entries(),
            )?;
        }
        log::info!("N={n}: {}", outcome.summary());
        out.push(TrainReport {
            n,
            checkpoint: path,
            summary: outcome.summary(),
            converged: outcome.converged,
        });
    }
    Ok(out)
}

/// Loaded policy plus the window table it reads, if any.
pub struct LoadedPolicy {
    pub policy: TrainedPolicy,
    pub table: Option<WindowTable>,
    pub n: usize,
}

pub fn load_policy(
    cfg: &ExperimentConfig,
    spec: &Arc<SystemSpec>,
    set: &Arc<QuantizerSet>,
    path: &Path,
) -> Result<LoadedPolicy> {
    let hash = cfg.hash();
    let ckpt = Checkpoint::load(path)?;
    if ckpt.config_hash != hash {
        return Err(CliError::Validation(format!(
            "{} was trained under config {}, not {hash}",
            path.display(),
            ckpt.config_hash
        )));
    }
    let table = ckpt.to_table(set, cfg.v0)?;
    let n = ckpt.n;
    match ckpt.scheme {
        Scheme::Window => {
            let codec = WindowCodec::new(n, spec.mp_size(), set.len())?;
            let key = window_key(spec, set, n);
            let wt = match load_window_cache(&cache_path(&cfg.output_dir, &key), &key)? {
                Some(entries) => {
                    WindowTable::from_entries(spec.clone(), set.clone(), n, cfg.dense_cap, &entries)?
                }
                None => WindowTable::build(spec.clone(), set.clone(), n, cfg.dense_cap)?,
            };
            Ok(LoadedPolicy {
                policy: TrainedPolicy::Window(window_policy_from_table(&table, codec)),
                table: Some(wt),
                n,
            })
        }
        Scheme::Lattice => {
            let lattice = Arc::new(BeliefLattice::build(spec.x_size(), n, cfg.lattice_cap)?);
            let occ_path = occupation_path(path);
            let visits = load_occupation(&occ_path, &hash)?.ok_or_else(|| {
                CliError::Validation(format!("{} belongs to another config", occ_path.display()))
            })?;
            if visits.len() != lattice.len() {
                return Err(CliError::Validation(format!(
                    "{} has {} points, lattice has {}",
                    occ_path.display(),
                    visits.len(),
                    lattice.len()
                )));
            }
            let policy =
                lattice_policy_from_table(&table, lattice, OccupationCounts::from_visits(visits))?;
            Ok(LoadedPolicy {
                policy: TrainedPolicy::Lattice(policy),
                table: None,
                n,
            })
        }
    }
}

fn rollout_policy(
    spec: &SystemSpec,
    set: &QuantizerSet,
    loaded: &mut LoadedPolicy,
    rc: &RolloutConfig,
) -> Result<RolloutResult> {
    Ok(match &loaded.policy {
        TrainedPolicy::Window(p) => rollout(spec, set, p, loaded.table.as_mut(), rc)?,
        TrainedPolicy::Lattice(p) => rollout(spec, set, p, None, rc)?,
    })
}

/// Rolls out each checkpoint for every configured seed and appends the rows
/// to the config's results file.
pub fn eval(cfg: &ExperimentConfig, checkpoints: &[PathBuf]) -> Result<(PathBuf, Vec<Row>)> {
    let (spec, set) = cfg.build()?;
    let paths: Vec<PathBuf> = if checkpoints.is_empty() {
        cfg.n.iter().map(|&n| checkpoint_path(cfg, n)).collect()
    } else {
        checkpoints.to_vec()
    };
    let mut rows = Vec::new();
    for path in &paths {
        let mut loaded = load_policy(cfg, &spec, &set, path)?;
        for &seed in &cfg.seeds {
            let rc = RolloutConfig::new(cfg.horizon, seed).with_decoder(cfg.decoder);
            let r = rollout_policy(&spec, &set, &mut loaded, &rc)?;
            if r.flagged {
                log::warn!("seed {seed}: fallback rate {:.4}", r.fallback_rate());
            }
            rows.push(Row {
                experiment: cfg.name.clone(),
                scheme: cfg.scheme.name().into(),
                n: Some(loaded.n),
                rate: cfg.rate(),
                seed,
                avg_distortion: r.avg_distortion,
                discounted_distortion: r.discounted_distortion,
                fallback_rate: r.fallback_rate(),
            });
        }
    }
    let out = results::results_path(&cfg.output_dir, &cfg.hash());
    results::append(&out, &rows)?;
    Ok((out, rows))
}

/// Memoryless encoding when `|X| = |M|`, and the best single quantizer
/// (scored under the invariant law) for i.i.d. sources.
pub fn baseline(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<Row>)> {
    let spec = cfg.system()?;
    let mut rows = Vec::new();
    let row = |scheme: &str, seed: u64, avg: f64, disc: f64| Row {
        experiment: cfg.name.clone(),
        scheme: scheme.into(),
        n: None,
        rate: cfg.rate(),
        seed,
        avg_distortion: avg,
        discounted_distortion: disc,
        fallback_rate: 0.0,
    };
    if spec.x_size() == spec.m_size() {
        for &seed in &cfg.seeds {
            let r = memoryless_baseline(&spec, cfg.horizon, seed)?;
            rows.push(row("memoryless", seed, r.avg_distortion, r.discounted_distortion));
        }
    }
    if spec.source.is_iid() {
        let opt = exhaustive_quantizer_optimum(&spec, cfg.quantizer_cap as u128 * 1024)?;
        let disc = opt.distortion * (1.0 - spec.beta.powf(cfg.horizon as f64)) / (1.0 - spec.beta);
        rows.push(row("exhaustive", 0, opt.distortion, disc));
    }
    if rows.is_empty() && !cfg.seeds.is_empty() {
        return Err(CliError::Validation(
            "no baseline applies: need |X| = |M| or an i.i.d. source".into(),
        ));
    }
    let out = results::results_path(&cfg.output_dir, &cfg.hash());
    results::append(&out, &rows)?;
    Ok((out, rows))
}

/// `uniform`, `zeta`, `delta:<k>` or an explicit probability list.
pub fn parse_prior(text: &str, spec: &SystemSpec) -> Result<Belief> {
    let x = spec.x_size();
    let t = text.trim();
    if t == "uniform" {
        return Ok(Belief::uniform(x));
    }
    if t == "zeta" {
        return Ok(spec.zeta().clone());
    }
    if let Some(k) = t.strip_prefix("delta:") {
        let k: usize = k
            .parse()
            .ok()
            .filter(|&k| k < x)
            .ok_or_else(|| CliError::Validation(format!("bad point mass `{t}`")))?;
        return Ok(Belief::point_mass(x, k));
    }
    let probs = t
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            crate::matrix_io::parse_number(s)
                .ok_or_else(|| CliError::Validation(format!("`{s}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if probs.len() != x {
        return Err(CliError::Validation(format!("prior needs {x} entries")));
    }
    Ok(Belief::new(probs)?)
}

pub fn stability(
    cfg: &ExperimentConfig,
    mu: &str,
    nu: &str,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let (spec, set) = cfg.build()?;
    let (mu, nu) = (parse_prior(mu, &spec)?, parse_prior(nu, &spec)?);
    Ok(stability_experiment(&spec, &set, &mu, &nu, horizon, samples, seed)?)
}

pub fn loss(
    cfg: &ExperimentConfig,
    samples: usize,
    horizon: usize,
    policies: usize,
    seed: u64,
) -> Result<Vec<LossEstimate>> {
    let (spec, set) = cfg.build()?;
    cfg.n
        .iter()
        .map(|&n| {
            let lc = LossConfig {
                n,
                samples,
                horizon,
                policies,
                seed,
            };
            Ok(loss_estimate(&spec, &set, &lc)?)
        })
        .collect()
}
