//! One function per subcommand. Each resolves its parameters (flags over
//! config over defaults), runs the library, and renders CSV or JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde_json::json;

use qib_core::benchmarks::advantage_gap;
use qib_core::cq::{CQState, ObjectiveConfig};
use qib_core::experiments::{
    beta_sweep, classify_pipeline, default_suffstats_config, gamma_sweep, gamma_sweep_csv,
    suffstats_pipeline, ClassifyConfig, SuffStatsParams,
};
use qib_core::io::{ChannelJson, StateJson};
use qib_core::qdib::run_qdib_from;
use qib_core::qib::run_qib_from;
use qib_core::trace::{fmt_num, IterationTrace};

use crate::config::{load_channel, load_state, Generator, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{emit, to_json, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Options shared by every subcommand.
pub struct Context {
    pub config: LoadedConfig,
    pub seed: u64,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub emit_state: Option<PathBuf>,
}

impl Context {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        emit(self.out.as_deref(), text)
    }

    fn dump_state(&self, state: &CQState) -> CliResult<()> {
        match &self.emit_state {
            Some(p) => write_atomic(p, &to_json(&StateJson::from_state(state))),
            None => Ok(()),
        }
    }
}

fn trace_json(cfg: &ObjectiveConfig, trace: &IterationTrace) -> serde_json::Value {
    json!({
        "config": cfg,
        "status": trace.status,
        "reached_tol": trace.reached_tol,
        "iterations": trace.len(),
        "violations": trace.violations,
        "final": trace.last(),
        "rows": trace.rows,
    })
}

pub fn run_qib_cmd(ctx: &Context) -> CliResult<()> {
    let state = ctx.config.state(ctx.seed, None)?;
    ctx.dump_state(&state)?;
    let cfg = ctx
        .config
        .objective(&ObjectiveConfig::new(1.0, 5.0, 2), ctx.seed);
    let initial = ctx.config.initial_channel(&state, &cfg)?;
    let (channel, trace) = run_qib_from(&state, &cfg, initial)?;
    let text = match ctx.format_or(Format::Csv) {
        Format::Csv => trace.to_csv(),
        Format::Json => {
            let mut v = trace_json(&cfg, &trace);
            v["channel"] = json!(ChannelJson::from_channel(&channel));
            to_json(&v)
        }
    };
    ctx.emit(&text)
}

pub fn run_qdib_cmd(ctx: &Context) -> CliResult<()> {
    let state = ctx.config.state(ctx.seed, None)?;
    ctx.dump_state(&state)?;
    let defaults = ObjectiveConfig::new(0.0, 5.0, state.size_x());
    let cfg = ctx.config.objective(&defaults, ctx.seed);
    let initial = ctx.config.initial_channel(&state, &cfg)?;
    let (channel, trace) = run_qdib_from(&state, &cfg, initial)?;
    let text = match ctx.format_or(Format::Csv) {
        Format::Csv => trace.to_csv(),
        Format::Json => {
            let mut v = trace_json(&cfg, &trace);
            v["channel"] = json!(ChannelJson::from_channel(&channel));
            to_json(&v)
        }
    };
    ctx.emit(&text)
}

/// Defaults reproduce the shipped acceleration demo: 256 random qubit states,
/// classical `|T| = 16`, `α = 1`, `β = 10`, `γ ∈ α·{1, 0.55, 0.4, 0.3}`.
pub fn gamma_sweep_cmd(ctx: &Context) -> CliResult<()> {
    let state = ctx
        .config
        .state(ctx.seed, Some(Generator::QubitEnsemble { size_x: 256 }))?;
    ctx.dump_state(&state)?;
    let defaults = ObjectiveConfig::new(1.0, 10.0, 16)
        .with_classical(true)
        .with_max_iters(200);
    let cfg = ctx.config.objective(&defaults, ctx.seed);
    let gammas = ctx
        .config
        .file
        .gamma_sweep
        .as_ref()
        .and_then(|b| b.gammas.clone())
        .unwrap_or_else(|| [1.0, 0.55, 0.4, 0.3].map(|g| g * cfg.alpha).to_vec());
    let runs = gamma_sweep(&state, &cfg, &gammas)?;
    let text = match ctx.format_or(Format::Csv) {
        Format::Csv => gamma_sweep_csv(&runs),
        Format::Json => {
            let items: Vec<_> = runs
                .iter()
                .map(|r| {
                    let mut v = trace_json(&cfg.clone().with_gamma(r.gamma), &r.trace);
                    v["gamma"] = json!(r.gamma);
                    v
                })
                .collect();
            to_json(&items)
        }
    };
    ctx.emit(&text)
}

pub fn beta_sweep_cmd(ctx: &Context) -> CliResult<()> {
    let state = ctx
        .config
        .state(ctx.seed, Some(Generator::QubitEnsemble { size_x: 16 }))?;
    ctx.dump_state(&state)?;
    let cfg = ctx
        .config
        .objective(&ObjectiveConfig::new(1.0, 1.0, 2), ctx.seed);
    let block = ctx.config.file.beta_sweep.as_ref();
    let betas = block
        .and_then(|b| b.betas.clone())
        .unwrap_or_else(|| vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0]);
    let samples = block.and_then(|b| b.kappa_samples).unwrap_or(200);
    let rows = beta_sweep(&state, &cfg, &betas, samples)?;
    let text = match ctx.format_or(Format::Csv) {
        Format::Csv => {
            let mut out = String::from("beta,f,H_T,I_TX,I_TY,kappa_lower_bound\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_num(r.beta),
                    fmt_num(r.f),
                    fmt_num(r.h_t),
                    fmt_num(r.i_tx),
                    fmt_num(r.i_ty),
                    fmt_num(r.kappa_lower_bound)
                );
            }
            out
        }
        Format::Json => to_json(&rows),
    };
    ctx.emit(&text)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct AdvantageArgs {
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

pub fn advantage_cmd(ctx: &Context, args: AdvantageArgs) -> CliResult<()> {
    let file = &ctx.config.file;
    let block = file.advantage.as_ref();
    let d = args.d.or(block.and_then(|b| b.d)).unwrap_or(3);
    let n = args.n.or(block.and_then(|b| b.n)).unwrap_or(2);
    let alpha = args.alpha.or(file.alpha).unwrap_or(1.0);
    let beta = args.beta.or(file.beta).unwrap_or(2.0);
    let report = advantage_gap(d, n, alpha, beta)?;
    let text = match ctx.format_or(Format::Csv) {
        Format::Csv => format!(
            "d,n,beta,quantum,classical,gap\n{},{},{},{},{},{}\n",
            report.d,
            report.n,
            fmt_num(report.beta),
            fmt_num(report.quantum),
            fmt_num(report.classical),
            fmt_num(report.gap)
        ),
        Format::Json => to_json(&report),
    };
    ctx.emit(&text)
}

/// JSON metrics by default; `--format csv` gives the decision-region grid.
pub fn classify_cmd(ctx: &Context) -> CliResult<()> {
    let defaults = ClassifyConfig::default();
    let mut cfg = ClassifyConfig {
        objective: ctx.config.objective(&defaults.objective, ctx.seed),
        ..defaults
    };
    if let Some(b) = &ctx.config.file.classify {
        let ds = &mut cfg.dataset;
        ds.records = b.records.unwrap_or(ds.records);
        ds.size_x2 = b.size_x2.unwrap_or(ds.size_x2);
        ds.num_labels = b.num_labels.unwrap_or(ds.num_labels);
        ds.train_fraction = b.train_fraction.unwrap_or(ds.train_fraction);
        ds.wide_noise = b.wide_noise.unwrap_or(ds.wide_noise);
        ds.permute = b.permute.unwrap_or(ds.permute);
        cfg.ridge = b.ridge.unwrap_or(cfg.ridge);
    }
    let outcome = classify_pipeline(ctx.seed, &cfg)?;
    ctx.dump_state(&outcome.state)?;
    let text = match ctx.format_or(Format::Json) {
        Format::Json => to_json(&outcome.metrics),
        Format::Csv => {
            let mut out = String::from("x1,x2,quantum,classical,linear_ref\n");
            for g in &outcome.grid {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    g.x1, g.x2, g.quantum, g.classical, g.linear_ref
                );
            }
            out
        }
    };
    ctx.emit(&text)
}

/// The `f_DIB` panel goes to `--out`; the information panel to `info_out`.
pub fn suffstats_cmd(ctx: &Context, info_out: Option<&Path>) -> CliResult<()> {
    let mut params = SuffStatsParams::new(ctx.seed);
    if let Some(b) = &ctx.config.file.suffstats {
        params.size_x1 = b.size_x1.unwrap_or(params.size_x1);
        params.size_x2 = b.size_x2.unwrap_or(params.size_x2);
        params.nu = b.nu.unwrap_or(params.nu);
    }
    let cfg = ctx
        .config
        .objective(&default_suffstats_config(&params), ctx.seed);
    let outcome = suffstats_pipeline(&params, &cfg)?;
    ctx.dump_state(&outcome.ensemble.state)?;
    if let Some(p) = info_out {
        write_atomic(p, &outcome.info_csv())?;
    }
    let text = match ctx.format_or(Format::Csv) {
        Format::Csv => outcome.fdib_csv(),
        Format::Json => to_json(&outcome.metrics),
    };
    ctx.emit(&text)
}

pub fn validate_cmd(
    ctx: &Context,
    state_path: Option<&Path>,
    channel_path: Option<&Path>,
) -> CliResult<()> {
    if state_path.is_none() && channel_path.is_none() {
        return Err(CliError::Usage(
            "validate needs --state and/or --channel".into(),
        ));
    }
    let mut report = serde_json::Map::new();
    let state = state_path.map(load_state).transpose()?;
    if let Some(s) = &state {
        report.insert(
            "state".into(),
            json!({"sizeX": s.size_x(), "dimY": s.dim_y(), "classicalY": s.is_classical_y()}),
        );
    }
    if let Some(p) = channel_path {
        let c = load_channel(p)?;
        if let Some(s) = &state {
            if s.size_x() != c.size_x() {
                return Err(CliError::Input {
                    context: p.display().to_string(),
                    source: qib_core::Error::SizeMismatch(format!(
                        "channel has {} symbols, state has {}",
                        c.size_x(),
                        s.size_x()
                    )),
                });
            }
        }
        report.insert(
            "channel".into(),
            json!({"sizeX": c.size_x(), "dimT": c.dim_t(), "classical": c.is_classical()}),
        );
    }
    report.insert("valid".into(), json!(true));
    let text = match ctx.format_or(Format::Json) {
        Format::Json => to_json(&report),
        Format::Csv => "valid\ntrue\n".to_string(),
    };
    ctx.emit(&text)
}
