//! `gprelay`: run Sensor/Actor episodes and batches, or the stationary
//! β/budget ablation, writing CSV metrics and PPM map renderings.

mod render;
mod settings;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gprelay_core::ablation::{run_ablation, AblationConfig, AblationResult};
use gprelay_core::beta_sgp::SelectionOptions;
use gprelay_core::metrics::{metrics_csv, summary_csv, FrameworkSummary};
use gprelay_core::sim::{run_batch, run_episode, BatchEpisode, BatchResult};
use gprelay_core::{Framework, GridMap, MapSource, SimConfig};

use render::{swept_cells, write_ppm, Overlay};
use settings::{Settings, ABLATION_DEFAULTS, RUN_DEFAULTS};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config entries or values; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<gprelay_core::Error> for CliError {
    fn from(e: gprelay_core::Error) -> Self {
        match e {
            gprelay_core::Error::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "gprelay", version, about = "Bandwidth-limited map relay between a Sensor and an Actor robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one episode per framework, or a batch over random Sensor starts.
    Run(RunArgs),
    /// Stationary full-map Sensor sweep over β and the point budget.
    Ablation(AblationArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Map file (`H W` header, then comma-separated rows).
    #[arg(long, conflicts_with = "gen_map")]
    map: Option<PathBuf>,
    /// Generate a synthetic map, e.g. `64x64:588`.
    #[arg(long, value_name = "WxH:SEED")]
    gen_map: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any setting, e.g. `--set sigma_th=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated frameworks: u, fi, fi-gp, beta-sgp or beta-sgp-<β>.
    #[arg(long)]
    framework: Option<String>,
    /// β for frameworks given as plain `beta-sgp`.
    #[arg(long)]
    beta: Option<f64>,
    /// Per-tick budgets, repeated periodically, e.g. `2,1`.
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    n_sim: Option<usize>,
    #[arg(long)]
    sensor_horizon: Option<usize>,
}

#[derive(Args, Debug)]
struct AblationArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated β values.
    #[arg(long)]
    betas: Option<String>,
    /// Comma-separated budgets m*.
    #[arg(long)]
    budgets: Option<String>,
}

fn layered(defaults: &[(&str, &str)], common: &Common, flags: &[(&str, Option<String>)]) -> Result<Settings, CliError> {
    let mut s = Settings::new(defaults);
    if let Some(path) = &common.config {
        s.merge_file(path)?;
    }
    if let Some(m) = &common.map {
        s.set("map", &m.display().to_string())?;
        s.set("gen_map", "")?;
    }
    if let Some(g) = &common.gen_map {
        s.set("gen_map", g)?;
        s.set("map", "")?;
    }
    if let Some(seed) = common.seed {
        s.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &common.out {
        s.set("out", &out.display().to_string())?;
    }
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v)?;
        }
    }
    for kv in &common.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        s.set(k.trim(), v)?;
    }
    Ok(s)
}

fn map_source(s: &Settings) -> Result<MapSource, CliError> {
    match (s.raw("map"), s.raw("gen_map")) {
        ("", "") => Err(CliError::Usage("a map is required: pass --map or --gen-map".into())),
        (path, "") => Ok(MapSource::File(PathBuf::from(path))),
        ("", spec) => Ok(MapSource::parse_generator(spec)?),
        _ => Err(CliError::Usage("map and gen_map are mutually exclusive".into())),
    }
}

fn output_dir(s: &Settings) -> Result<PathBuf, CliError> {
    let out = PathBuf::from(s.raw("out"));
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    Ok(out)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn frameworks(s: &Settings) -> Result<Vec<Framework>, CliError> {
    let beta: f64 = s.get("beta")?;
    let names: Vec<String> = s.list("frameworks")?;
    if names.is_empty() {
        return Err(CliError::Usage("no frameworks given".into()));
    }
    names
        .iter()
        .map(|name| {
            let fw: Framework = name.parse()?;
            let plain = matches!(name.trim().to_ascii_lowercase().replace('_', "-").as_str(), "beta-sgp" | "betasgp");
            Ok(match fw {
                Framework::BetaSgp { .. } if plain => Framework::BetaSgp { beta },
                other => other,
            })
        })
        .collect()
}

fn sim_config(s: &Settings) -> Result<SimConfig, CliError> {
    let mut cfg = SimConfig {
        budget: s.list("budget")?,
        actor_start: s.cell("actor_start")?,
        goal: s.cell("goal")?,
        sensor_horizon: s.get("sensor_horizon")?,
        max_steps: s.auto("max_steps")?,
        sigma_tilde: s.auto("sigma_tilde")?,
        seed: s.get("seed")?,
        ..SimConfig::default()
    };
    let a = &mut cfg.actor;
    a.window = s.get("actor_window")?;
    a.noise_std = s.get("actor_noise")?;
    a.sigma_th = s.get("sigma_th")?;
    a.y0 = s.get("y0")?;
    a.epsilon = s.get("epsilon")?;
    a.a = s.get("a")?;
    a.fit_lr = s.get("actor_fit_lr")?;
    a.max_fit_points = s.get("max_fit_points")?;
    a.deadlock_visits = s.get("deadlock_visits")?;
    a.freeze_len = s.get("freeze_len")?;
    let z = &mut cfg.sensor;
    z.window = s.get("sensor_window")?;
    z.noise_std = s.get("sensor_noise")?;
    z.gamma_coeff = s.get("gamma")?;
    z.max_waypoints = s.get("max_waypoints")?;
    z.mc_samples = s.get("mc_samples")?;
    z.selection = SelectionOptions {
        epochs: s.get("selection_epochs")?,
        lr: s.get("selection_lr")?,
        joint_hyperparams: s.get("selection_joint_hyperparams")?,
        ..SelectionOptions::default()
    };
    z.fit_lr = s.get("sensor_fit_lr")?;
    z.max_fit_points = s.get("max_fit_points")?;
    if cfg.actor.window % 2 == 0 || cfg.sensor.window % 2 == 0 {
        return Err(CliError::Usage("perception windows must be odd".into()));
    }
    Ok(cfg)
}

fn fmt_summary(summary: &[FrameworkSummary], failed: usize) -> String {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"));
    let mut s = format!(
        "{:<14} {:>4} {:>16} {:>18} {:>18} {:>10} {:>10}\n",
        "framework", "n", "t_final", "path cost", "points sent", "r_cost %", "r_com %"
    );
    for r in summary {
        let _ = writeln!(
            s,
            "{:<14} {:>4} {:>16} {:>18} {:>18} {:>10} {:>10}",
            r.framework,
            r.episodes,
            format!("{:.2} ± {:.2}", r.mu_t, r.sd_t),
            format!("{:.3} ± {:.3}", r.mu_c, r.sd_c),
            format!("{:.2} ± {:.2}", r.mu_b, r.sd_b),
            na(r.r_cost_pct),
            na(r.r_com_pct)
        );
    }
    if failed > 0 {
        let _ = writeln!(s, "{failed} episode(s) failed and are excluded");
    }
    s
}

fn render_episodes(out: &Path, map: &GridMap, result: &BatchResult, cfg: &SimConfig) -> Result<(), CliError> {
    let dims = map.dims();
    let truth = out.join("truth.ppm");
    write_ppm(&truth, dims, map.values(), &Overlay::default()).map_err(|e| io_err(&truth, e))?;
    for e in &result.episodes {
        let Ok(r) = &e.result else { continue };
        let overlay = Overlay {
            actor_seen: swept_cells(dims, &r.actor_trace, cfg.actor.window),
            sensor_seen: swept_cells(dims, &r.sensor_trace, cfg.sensor.window),
            actor_path: r.actor_trace.clone(),
            transmitted: r.transmitted_cells(),
        };
        let path = out.join(format!("sim{:03}_{}.ppm", e.sim_id, r.framework));
        write_ppm(&path, dims, &r.final_prediction.mean, &overlay).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let flags = [
        ("frameworks", args.framework.clone()),
        ("beta", args.beta.map(|b| b.to_string())),
        ("budget", args.budget.clone()),
        ("n_sim", args.n_sim.map(|n| n.to_string())),
        ("sensor_horizon", args.sensor_horizon.map(|n| n.to_string())),
    ];
    let s = layered(RUN_DEFAULTS, &args.common, &flags)?;
    let fws = frameworks(&s)?;
    let base = sim_config(&s)?;
    let n_sim: usize = s.get("n_sim")?;
    let fixed_start = s.auto_cell("sensor_start")?;
    let images: bool = s.get("images")?;
    let source = map_source(&s)?;
    let out = output_dir(&s)?;
    write(&out.join("config.resolved"), &s.render())?;
    let map = source.load()?;

    let result = match fixed_start {
        None => run_batch(&map, &base, &fws, n_sim, base.seed)?,
        Some(start) => {
            if n_sim != 1 {
                return Err(CliError::Usage("a fixed sensor_start needs n_sim = 1".into()));
            }
            let episodes = fws
                .iter()
                .map(|&framework| {
                    let cfg = SimConfig { framework, sensor_start: start, ..base.clone() };
                    BatchEpisode { sim_id: 0, framework, sensor_start: start, result: run_episode(&map, &cfg) }
                })
                .collect();
            BatchResult { episodes }
        }
    };
    for e in result.failures() {
        if let Err(err) = &e.result {
            eprintln!("simulation {} ({}) failed: {err}", e.sim_id, e.framework);
        }
    }
    let rows = result.metrics();
    let summary = result.summary();
    write(&out.join("metrics.csv"), &metrics_csv(&rows))?;
    write(&out.join("summary.csv"), &summary_csv(&summary))?;
    if images {
        render_episodes(&out, &map, &result, &base)?;
    }
    let failed = result.failures().count();
    print!("{}", fmt_summary(&summary, failed));
    if rows.is_empty() {
        return Err(CliError::Runtime("every episode failed".into()));
    }
    Ok(())
}

fn table(r: &AblationResult, betas: &[f64], budgets: &[usize], value: impl Fn(f64, usize) -> f64) -> String {
    let mut s = String::from("beta");
    for m in budgets {
        let _ = write!(s, ",{m}");
    }
    s.push('\n');
    for &b in betas {
        let _ = write!(s, "{b}");
        for &m in budgets {
            let _ = write!(s, ",{}", value(b, m));
        }
        s.push('\n');
    }
    debug_assert_eq!(r.cells.len(), betas.len() * budgets.len());
    s
}

fn cmd_ablation(args: AblationArgs) -> Result<(), CliError> {
    let flags = [("betas", args.betas.clone()), ("budgets", args.budgets.clone())];
    let s = layered(ABLATION_DEFAULTS, &args.common, &flags)?;
    let betas: Vec<f64> = s.list("betas")?;
    let budgets: Vec<usize> = s.list("budgets")?;
    let cfg = AblationConfig {
        betas: betas.clone(),
        budgets: budgets.clone(),
        goal: s.auto_cell("goal")?,
        sigma_tilde: s.auto("sigma_tilde")?,
        noise_std: s.get("noise")?,
        prior_mean: s.get("y0")?,
        fit_epochs: s.get("fit_epochs")?,
        fit_lr: s.get("fit_lr")?,
        max_fit_points: s.get("max_fit_points")?,
        mc_samples: s.get("mc_samples")?,
        selection: SelectionOptions {
            epochs: s.get("selection_epochs")?,
            lr: s.get("selection_lr")?,
            ..SelectionOptions::default()
        },
        seed: s.get("seed")?,
        ..AblationConfig::default()
    };
    let images: bool = s.get("images")?;
    let source = map_source(&s)?;
    let out = output_dir(&s)?;
    write(&out.join("config.resolved"), &s.render())?;
    let map = source.load()?;
    let r = run_ablation(&map, &cfg)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    let nlpd = table(&r, &betas, &budgets, |b, m| r.cell(b, m).map_or(f64::NAN, |c| c.nlpd));
    let mse = table(&r, &betas, &budgets, |b, m| r.cell(b, m).map_or(f64::NAN, |c| c.mse));
    write(&out.join("ablation_nlpd.csv"), &nlpd)?;
    write(&out.join("ablation_mse.csv"), &mse)?;
    if images {
        let dims = map.dims();
        let truth = out.join("truth.ppm");
        write_ppm(&truth, dims, map.values(), &Overlay::default()).map_err(|e| io_err(&truth, e))?;
        for c in &r.cells {
            let overlay = Overlay { transmitted: c.transmitted.clone(), ..Overlay::default() };
            let path = out.join(format!("ablation_beta{}_m{}.ppm", c.beta, c.budget));
            write_ppm(&path, dims, &c.prediction.mean, &overlay).map_err(|e| io_err(&path, e))?;
        }
    }
    println!("NLPD (rows beta, columns m*)\n{nlpd}\nMSE (rows beta, columns m*)\n{mse}");
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GPRELAY_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("GPRELAY_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Ablation(a) => cmd_ablation(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}\n\nSee `gprelay --help` for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
