//! Command-line front end for the payofflab library.

pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use payofflab::experiments::{
    cluster_points, default_noise_eps, endpoint_distribution, find_tremble_control, heatmap_grid,
    lrs_noise_sweep, multi_endpoint_strategies, pczd_sweep, single_run, trembling_sweep, write_clusters_csv,
    write_runs_csv, write_trajectory_csv, Census, Learner,
};
use payofflab::game::{sample_arcsine_strategy, GameParams, MemoryOneStrategy, PayoffPair};
use payofflab::learn::{long_run_payoff, lrs_run, pga_run, LearnerConfig, TerminationReason, Trajectory};
use payofflab::markov::{discounted_payoffs, InitialDistribution};
use payofflab::parallel::task_rng;
use payofflab::payoff::{fallback_gradient, payoff_gradient};
use payofflab::region::{classify_fixed_strategy, feasible_region};
use payofflab::zd::{
    chen_zinger_conditions, equalizer_e0_solve, equalizer_strategy, is_equalizer, phi_max, zd_relation_residual,
    zd_strategy, ZDParams,
};
use payofflab::{Error, Result};

use config::{resolve, Numbers, Vec4};

pub const SEED_ENV: &str = "PAYOFFLAB_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(name = "payofflab", version, about = "Memory-one iterated games: payoffs, payoff control and selfish learning")]
pub struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML (or .json) file supplying any flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Falls back to the config file, then $PAYOFFLAB_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Long-run payoffs of a strategy pair.
    Payoff(PairArgs),
    /// Gradient of Y's payoff in Y's strategy.
    Gradient(PairArgs),
    /// Zero-determinant strategies.
    #[command(subcommand)]
    Zd(ZdCommand),
    /// Equalizer strategies.
    #[command(subcommand)]
    Equalizer(EqualizerCommand),
    /// Sufficient conditions for robust payoff control.
    Conditions(ConditionArgs),
    /// Feasible payoff region of a fixed strategy.
    Region(RegionArgs),
    /// Projected gradient ascent from one starting strategy.
    Pga(LearnArgs),
    /// Local random search from one starting strategy.
    Lrs(LearnArgs),
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Replications with the parameters of the paper's figures bundled in.
    Replicate(ReplicateArgs),
}

#[derive(Subcommand, Debug)]
enum ZdCommand {
    Make(ZdMakeArgs),
    Check(ZdCheckArgs),
}

#[derive(Subcommand, Debug)]
enum EqualizerCommand {
    Make(EqMakeArgs),
    Test(EqTestArgs),
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// Endpoint census of one fixed strategy.
    Endpoints(EndpointArgs),
    /// Censuses over a grid of positively correlated ZD strategies.
    Pczd(PczdArgs),
    /// LRS at increasing noise levels.
    Noise(NoiseArgs),
    /// Gradient ascent through a trembling hand.
    Tremble(TrembleArgs),
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct GameArg {
    /// Payoffs R,S,T,P.
    #[arg(long, allow_hyphen_values = true)]
    game: Option<Vec4>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct PairArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long)]
    p: Option<Vec4>,
    #[arg(long)]
    q: Option<Vec4>,
    /// Use discounted payoffs with this λ.
    #[arg(long)]
    discount: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ZdMakeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ZdCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long)]
    p: Option<Vec4>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<f64>,
    /// Random interior co-player strategies to test against.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EqMakeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long)]
    p_cc: Option<f64>,
    #[arg(long)]
    p_dd: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EqTestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long)]
    p: Option<Vec4>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ConditionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long)]
    p: Option<Vec4>,
    #[arg(long)]
    chi: Option<f64>,
}

/// Exactly one way of naming the fixed strategy X plays.
#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct FixedArgs {
    #[arg(long)]
    p: Option<Vec4>,
    /// ZD parameters kappa,chi,phi.
    #[arg(long, allow_hyphen_values = true)]
    zd: Option<Numbers>,
    /// Equalizer parameters p_cc,p_dd.
    #[arg(long)]
    equalizer: Option<Numbers>,
}

impl FixedArgs {
    fn strategy(&self, g: &GameParams) -> Result<MemoryOneStrategy> {
        match (&self.p, &self.zd, &self.equalizer) {
            (Some(_), None, None) => strategy(self.p, "p"),
            (None, Some(z), None) => {
                let [kappa, chi, phi] = z.exact::<3>("zd")?;
                zd_strategy(g, &ZDParams { kappa, chi, phi })
            }
            (None, None, Some(e)) => {
                let [p_cc, p_dd] = e.exact::<2>("equalizer")?;
                Ok(equalizer_strategy(g, p_cc, p_dd)?.0)
            }
            (None, None, None) => Err(Error::validation("p", "is required (or --zd / --equalizer)")),
            _ => Err(Error::validation("p", "give only one of --p, --zd, --equalizer")),
        }
    }
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct OutputArgs {
    /// Directory for CSV, JSON and SVG files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RegionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[command(flatten)]
    #[serde(flatten)]
    fixed: FixedArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct LearnerArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    payoff_tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<u64>,
    /// Trembling-hand error rate.
    #[arg(long)]
    error_rate: Option<f64>,
    /// LRS sampling radius.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    patience: Option<u64>,
    #[arg(long)]
    discount: Option<f64>,
    /// Distribution over CC,CD,DC,DD that discounted LRS payoffs start from.
    #[arg(long)]
    lrs_start: Option<Vec4>,
    /// Keep every k-th trajectory record.
    #[arg(long)]
    thinning: Option<u64>,
}

impl LearnerArgs {
    fn config(&self) -> Result<LearnerConfig> {
        let d = LearnerConfig::default();
        let cfg = LearnerConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            payoff_tolerance: self.payoff_tolerance.unwrap_or(d.payoff_tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            error_rate: self.error_rate.unwrap_or(d.error_rate),
            lrs_radius: self.radius.unwrap_or(d.lrs_radius),
            lrs_patience: self.patience.unwrap_or(d.lrs_patience),
            discount: self.discount.unwrap_or(d.discount),
            lrs_start: self.lrs_start.map(|v| v.0).unwrap_or(d.lrs_start),
            thinning: self.thinning.unwrap_or(d.thinning),
            stall_window: d.stall_window,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct LearnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[command(flatten)]
    #[serde(flatten)]
    fixed: FixedArgs,
    /// Starting strategy; drawn from the arcsine law when absent.
    #[arg(long)]
    q0: Option<Vec4>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LearnerKind {
    Pga,
    Lrs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct EndpointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[command(flatten)]
    #[serde(flatten)]
    fixed: FixedArgs,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    learner_kind: Option<LearnerKind>,
    /// Heatmap resolution per axis.
    #[arg(long)]
    bins: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct PczdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long)]
    chi_min: Option<f64>,
    #[arg(long)]
    chi_max: Option<f64>,
    #[arg(long)]
    chi_step: Option<f64>,
    #[arg(long)]
    phi_count: Option<usize>,
    #[arg(long)]
    n_q0: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Panel {
    /// Multi-endpoint strategies of the pcZD sweep of the same game.
    Pczd,
    /// Arcsine-sampled strategies with several PGA endpoints.
    General,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct NoiseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    game: GameArg,
    #[arg(long, value_enum)]
    panel: Option<Panel>,
    /// Strategies in the panel (general panel only).
    #[arg(long)]
    panel_size: Option<usize>,
    /// Starting strategies per noise level.
    #[arg(long)]
    n_q0: Option<usize>,
    /// PGA runs used to decide whether a strategy has several endpoints.
    #[arg(long)]
    screen_samples: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
struct TrembleArgs {
    /// Games separated by ';', e.g. "2,-1,7,0;3,0,5,1".
    #[arg(long, allow_hyphen_values = true, value_delimiter = ';')]
    games: Option<Vec<Vec4>>,
    #[arg(long)]
    n_p: Option<usize>,
    #[arg(long)]
    n_q0: Option<usize>,
    #[command(flatten)]
    learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Figure {
    Fig1f,
    Fig2,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig5,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ReplicateArgs {
    #[arg(value_enum)]
    figure: Figure,
    /// Number of sampled strategies (defaults to desk scale).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

/// Result of a command: the JSON report plus the process exit code.
struct Outcome {
    report: Value,
    /// Replaces the JSON on stdout when set.
    text: Option<String>,
    exit: i32,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, text: None, exit: 0 }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) => 2,
        Error::Convergence { .. } | Error::DegenerateChain { .. } | Error::Singular => 3,
        _ => 1,
    }
}

/// Parses `argv`, runs the command and writes its report. Returns the
/// process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
            return code;
        }
    };
    match execute(cli) {
        Ok(outcome) => {
            let printed = match outcome.text {
                Some(text) => write!(out, "{text}"),
                None => writeln!(out, "{}", serde_json::to_string_pretty(&outcome.report).unwrap_or_default()),
            };
            if printed.is_err() {
                return 1;
            }
            outcome.exit
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx {
    file: Option<Value>,
    seed: u64,
}

fn execute(cli: Cli) -> Result<Outcome> {
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let threads = cli.threads.or_else(|| file.as_ref()?.get("threads")?.as_u64().map(|v| v as usize));
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::validation("threads", "must be at least 1"));
        }
        set_threads(n);
    }
    let seed = match cli.seed {
        Some(s) => s,
        None => match file.as_ref().and_then(|f| f.get("seed")) {
            Some(v) => v.as_u64().ok_or_else(|| Error::validation("seed", "must be a non-negative integer"))?,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| Error::validation(SEED_ENV, format!("'{v}' is not a u64")))?,
                Err(_) => DEFAULT_SEED,
            },
        },
    };
    let ctx = Ctx { file, seed };
    match cli.command {
        Command::Payoff(a) => cmd_payoff(&ctx, &a),
        Command::Gradient(a) => cmd_gradient(&ctx, &a),
        Command::Zd(ZdCommand::Make(a)) => cmd_zd_make(&ctx, &a),
        Command::Zd(ZdCommand::Check(a)) => cmd_zd_check(&ctx, &a),
        Command::Equalizer(EqualizerCommand::Make(a)) => cmd_eq_make(&ctx, &a),
        Command::Equalizer(EqualizerCommand::Test(a)) => cmd_eq_test(&ctx, &a),
        Command::Conditions(a) => cmd_conditions(&ctx, &a),
        Command::Region(a) => cmd_region(&ctx, &a),
        Command::Pga(a) => cmd_learn(&ctx, &a, Learner::Pga),
        Command::Lrs(a) => cmd_learn(&ctx, &a, Learner::Lrs),
        Command::Sweep(SweepCommand::Endpoints(a)) => cmd_endpoints(&ctx, &a),
        Command::Sweep(SweepCommand::Pczd(a)) => cmd_pczd(&ctx, &a),
        Command::Sweep(SweepCommand::Noise(a)) => cmd_noise(&ctx, &a),
        Command::Sweep(SweepCommand::Tremble(a)) => cmd_tremble(&ctx, &a),
        Command::Replicate(a) => cmd_replicate(&ctx, &a),
    }
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) {
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_n: usize) {}

fn required<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::validation(name, "is required"))
}

fn game_of(a: &GameArg) -> Result<GameParams> {
    GameParams::from_array(required(a.game, "game")?.0)
}

fn strategy(v: Option<Vec4>, name: &str) -> Result<MemoryOneStrategy> {
    MemoryOneStrategy::new(required(v, name)?.0).map_err(|e| match e {
        Error::Validation { field, reason } => Error::Validation { field: format!("{name}.{field}"), reason },
        other => other,
    })
}

fn pair_json(pp: &PayoffPair) -> Value {
    let r = pp.rounded_2dp();
    json!({ "pi_y": pp.pi_y, "pi_x": pp.pi_x, "pi_y_2dp": r.pi_y, "pi_x_2dp": r.pi_x })
}

fn with_config(mut report: Value, config: Value, seed: u64) -> Value {
    if let Value::Object(map) = &mut report {
        map.insert("config".into(), config);
        map.insert("seed".into(), json!(seed));
    }
    report
}

fn comment(config: &Value, seed: u64) -> String {
    format!("config={} seed={seed}", serde_json::to_string(config).unwrap_or_default())
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn cmd_payoff(ctx: &Ctx, flags: &PairArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["payoff"])?;
    let g = game_of(&a.game)?;
    let p = strategy(a.p, "p")?;
    let q = strategy(a.q, "q")?;
    let (pp, mode) = match a.discount {
        Some(lambda) => (discounted_payoffs(&p, &q, &g, &InitialDistribution::for_pair(&p, &q), lambda)?, "discounted"),
        None => (long_run_payoff(&p, &q, &g), "long_run"),
    };
    let mut report = pair_json(&pp);
    report["mode"] = json!(mode);
    report["game"] = json!(g.as_array());
    report["p"] = json!(p.probs());
    report["q"] = json!(q.probs());
    Ok(Outcome::ok(with_config(report, config, ctx.seed)))
}

fn cmd_gradient(ctx: &Ctx, flags: &PairArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["gradient"])?;
    let g = game_of(&a.game)?;
    let p = strategy(a.p, "p")?;
    let q = strategy(a.q, "q")?;
    let (grad, degenerate) = match payoff_gradient(&p, &q, &g) {
        Ok(v) => (v, false),
        Err(Error::DegenerateChain { .. }) => (fallback_gradient(&p, &q, &g), true),
        Err(e) => return Err(e),
    };
    let report = json!({
        "gradient": grad.0,
        "max_norm": grad.max_norm(),
        "degenerate": degenerate,
        "payoff": pair_json(&long_run_payoff(&p, &q, &g)),
    });
    Ok(Outcome::ok(with_config(report, config, ctx.seed)))
}

fn cmd_zd_make(ctx: &Ctx, flags: &ZdMakeArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["zd", "make"])?;
    let g = game_of(&a.game)?;
    let zp = ZDParams { kappa: required(a.kappa, "kappa")?, chi: required(a.chi, "chi")?, phi: required(a.phi, "phi")? };
    let p = zd_strategy(&g, &zp)?;
    let report = json!({
        "p": p.probs(),
        "kappa": zp.kappa,
        "chi": zp.chi,
        "phi": zp.phi,
        "phi_max": phi_max(&g, zp.kappa, zp.chi).ok(),
        "classification": classify_fixed_strategy(&p, &g).as_str(),
    });
    Ok(Outcome::ok(with_config(report, config, ctx.seed)))
}

fn cmd_zd_check(ctx: &Ctx, flags: &ZdCheckArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["zd", "check"])?;
    let g = game_of(&a.game)?;
    let p = strategy(a.p, "p")?;
    let kappa = required(a.kappa, "kappa")?;
    let chi = required(a.chi, "chi")?;
    let samples = a.samples.unwrap_or(1000);
    let mut rng = task_rng(ctx.seed, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let q = sample_arcsine_strategy(&mut rng);
        let r = zd_relation_residual(&p, &ZDParams { kappa, chi, phi: 0.0 }, &q, &g)?;
        worst = worst.max(r);
    }
    let report = json!({ "max_residual": worst, "samples": samples, "enforced": worst < 1e-9 });
    Ok(Outcome::ok(with_config(report, config, ctx.seed)))
}

fn cmd_eq_make(ctx: &Ctx, flags: &EqMakeArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["equalizer", "make"])?;
    let g = game_of(&a.game)?;
    let (p, value) = equalizer_strategy(&g, required(a.p_cc, "p_cc")?, required(a.p_dd, "p_dd")?)?;
    let report = json!({ "p": p.probs(), "enforced_value": value });
    Ok(Outcome::ok(with_config(report, config, ctx.seed)))
}

fn cmd_eq_test(ctx: &Ctx, flags: &EqTestArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["equalizer", "test"])?;
    let g = game_of(&a.game)?;
    let p = strategy(a.p, "p")?;
    let eps = a.eps.unwrap_or(0.01);
    let tol = a.tol.unwrap_or(1e-9);
    let e0 = equalizer_e0_solve(&p, &g);
    let report = json!({
        "is_equalizer": is_equalizer(&p, &g, eps, tol),
        "e0": e0.map(|(beta, gamma)| json!({ "beta": beta, "gamma": gamma })),
    });
    Ok(Outcome::ok(with_config(report, config, ctx.seed)))
}

fn cmd_conditions(ctx: &Ctx, flags: &ConditionArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["conditions"])?;
    let g = game_of(&a.game)?;
    let p = a.p.map(|v| MemoryOneStrategy::new(v.0)).transpose()?;
    let report = chen_zinger_conditions(&g, p.as_ref(), a.chi)?;
    Ok(Outcome::ok(with_config(serde_json::to_value(report)?, config, ctx.seed)))
}

fn cmd_region(ctx: &Ctx, flags: &RegionArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["region"])?;
    let g = game_of(&a.game)?;
    let p = a.fixed.strategy(&g)?;
    let region = feasible_region(&p, &g);
    let candidates_csv = || -> Result<String> {
        let mut buf = Vec::new();
        writeln!(buf, "# {}", comment(&config, ctx.seed))?;
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["q_cc", "q_cd", "q_dc", "q_dd", "class_states", "pi_y", "pi_x"])?;
        for c in &region.candidates {
            let states: Vec<&str> = c.class_states.iter().map(|&s| payofflab::game::STATE_NAMES[s]).collect();
            let mut row: Vec<String> = c.q.iter().map(|v| v.to_string()).collect();
            row.push(states.join(" "));
            row.push(c.payoff.pi_y.to_string());
            row.push(c.payoff.pi_x.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        drop(w);
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    };
    let report = with_config(
        json!({
            "hull": region.hull.iter().map(pair_json).collect::<Vec<_>>(),
            "rightmost": pair_json(&region.rightmost),
            "shape": format!("{:?}", region.shape).to_lowercase(),
            "classification": classify_fixed_strategy(&p, &g).as_str(),
            "n_candidates": region.candidates.len(),
        }),
        config.clone(),
        ctx.seed,
    );
    if let Some(dir) = &a.output.out_dir {
        prepare_dir(dir)?;
        write_json(&dir.join("region.json"), &report)?;
        write_text(&dir.join("candidates.csv"), &candidates_csv()?)?;
    }
    let text = match a.output.format {
        Some(Format::Csv) => Some(candidates_csv()?),
        _ => None,
    };
    Ok(Outcome { report, text, exit: 0 })
}

fn trajectory_report(t: &Trajectory, q0: &MemoryOneStrategy) -> Value {
    json!({
        "q0": q0.probs(),
        "endpoint": t.endpoint.probs(),
        "endpoint_payoff": pair_json(&t.endpoint_payoff),
        "termination": t.termination.as_str(),
        "iterations": t.iterations,
        "degenerate_steps": t.degenerate_steps,
        "endpoint_form": payofflab::learn::classify_endpoint(&t.endpoint.probs(), payofflab::learn::ENDPOINT_TOL).class.as_str(),
    })
}

fn trajectory_csv(t: &Trajectory, comment_line: &str) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, comment_line, t)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn cmd_learn(ctx: &Ctx, flags: &LearnArgs, learner: Learner) -> Result<Outcome> {
    let section = if learner == Learner::Pga { "pga" } else { "lrs" };
    let (a, config) = resolve(flags, ctx.file.as_ref(), &[section])?;
    let g = game_of(&a.game)?;
    let p = a.fixed.strategy(&g)?;
    let cfg = a.learner.config()?;
    let mut rng = task_rng(ctx.seed, 0, 0);
    let q0 = match a.q0 {
        Some(_) => strategy(a.q0, "q0")?,
        None => sample_arcsine_strategy(&mut rng),
    };
    let t = match learner {
        Learner::Pga => pga_run(&p, &q0, &g, &cfg)?,
        Learner::Lrs => lrs_run(&p, &q0, &g, &cfg, &mut rng)?,
    };
    let report = with_config(trajectory_report(&t, &q0), config.clone(), ctx.seed);
    let line = comment(&config, ctx.seed);
    if let Some(dir) = &a.output.out_dir {
        prepare_dir(dir)?;
        write_json(&dir.join("report.json"), &report)?;
        write_text(&dir.join("trajectory.csv"), &trajectory_csv(&t, &line)?)?;
        write_text(&dir.join("trajectory.svg"), &svg::trajectory_svg(Some(&t), section))?;
    }
    let text = match a.output.format {
        Some(Format::Csv) => Some(trajectory_csv(&t, &line)?),
        _ => None,
    };
    // a run that never settles is a convergence failure for a single-run command
    let exit = if t.termination == TerminationReason::MaxIterations { 3 } else { 0 };
    Ok(Outcome { report, text, exit })
}

fn census_report(census: &Census, with_runs: bool) -> Value {
    let mut v = json!({
        "n_runs": census.runs.len(),
        "n_clusters": census.clusters.len(),
        "max_iteration_runs": census.max_iteration_runs(),
        "clusters": census.clusters,
    });
    if with_runs {
        v["runs"] = serde_json::to_value(&census.runs).unwrap_or(Value::Null);
    }
    v
}

/// Writes runs.csv, clusters.csv, report.json and heatmap.svg.
fn write_census(dir: &Path, census: &Census, g: &GameParams, bins: usize, report: &Value, line: &str, title: &str) -> Result<()> {
    prepare_dir(dir)?;
    write_runs_csv(create(&dir.join("runs.csv"))?, line, &census.runs)?;
    write_clusters_csv(create(&dir.join("clusters.csv"))?, line, &census.clusters)?;
    let mut full = report.clone();
    full["runs"] = serde_json::to_value(&census.runs)?;
    write_json(&dir.join("report.json"), &full)?;
    let grid = heatmap_grid(&cluster_points(&census.clusters), g, bins)?;
    write_text(&dir.join("heatmap.svg"), &svg::heatmap_svg(&grid, g, title))?;
    Ok(())
}

fn cmd_endpoints(ctx: &Ctx, flags: &EndpointArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["sweep", "endpoints"])?;
    let g = game_of(&a.game)?;
    let p = a.fixed.strategy(&g)?;
    let cfg = a.learner.config()?;
    let learner = match a.learner_kind.unwrap_or(LearnerKind::Pga) {
        LearnerKind::Pga => Learner::Pga,
        LearnerKind::Lrs => Learner::Lrs,
    };
    let census = endpoint_distribution(&p, &g, a.samples.unwrap_or(10_000), learner, &cfg, ctx.seed)?;
    census_outcome(ctx, census, &g, a.bins.unwrap_or(100), &a.output, config, "endpoints")
}

fn census_outcome(
    ctx: &Ctx,
    census: Census,
    g: &GameParams,
    bins: usize,
    output: &OutputArgs,
    config: Value,
    title: &str,
) -> Result<Outcome> {
    let report = with_config(census_report(&census, false), config.clone(), ctx.seed);
    let line = comment(&config, ctx.seed);
    if let Some(dir) = &output.out_dir {
        write_census(dir, &census, g, bins, &report, &line, title)?;
    }
    let text = match output.format {
        Some(Format::Csv) => {
            let mut buf = Vec::new();
            write_clusters_csv(&mut buf, &line, &census.clusters)?;
            Some(String::from_utf8(buf).expect("csv output is utf-8"))
        }
        _ => None,
    };
    Ok(Outcome { report, text, exit: 0 })
}

fn chi_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::validation("chi", "need chi_min <= chi_max and chi_step > 0"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

fn cmd_pczd(ctx: &Ctx, flags: &PczdArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["sweep", "pczd"])?;
    let g = game_of(&a.game)?;
    let cfg = a.learner.config()?;
    let chis = chi_grid(a.chi_min.unwrap_or(1.0), a.chi_max.unwrap_or(20.0), a.chi_step.unwrap_or(1.0))?;
    let report = pczd_sweep(&g, &chis, a.phi_count.unwrap_or(5), a.n_q0.unwrap_or(100), ctx.seed, &cfg)?;
    let value = with_config(serde_json::to_value(&report)?, config.clone(), ctx.seed);
    if let Some(dir) = &a.output.out_dir {
        prepare_dir(dir)?;
        write_json(&dir.join("report.json"), &value)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["chi", "phi", "p_cc", "p_cd", "p_dc", "p_dd", "n_clusters", "suboptimal_frequency", "global_pi_y_2dp", "global_pi_x_2dp"])?;
        for c in &report.cells {
            let p = c.p.map(|v| v.map(|x| x.to_string())).unwrap_or_else(|| [(); 4].map(|_| String::new()));
            let opt = c.global_optimum.map(|o| [o.pi_y.to_string(), o.pi_x.to_string()]).unwrap_or_default();
            let mut row = vec![c.chi.to_string(), c.phi.to_string()];
            row.extend(p);
            row.extend([c.n_clusters.to_string(), c.suboptimal_frequency.to_string()]);
            row.extend(opt);
            row.resize(10, String::new());
            w.write_record(row)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).expect("utf-8");
        write_text(&dir.join("cells.csv"), &format!("# {}\n{body}", comment(&config, ctx.seed)))?;
    }
    Ok(Outcome::ok(value))
}

/// Arcsine strategies whose PGA census finds more than one endpoint.
pub fn general_panel(g: &GameParams, size: usize, screen: usize, seed: u64, cfg: &LearnerConfig) -> Result<Vec<MemoryOneStrategy>> {
    let mut rng = task_rng(seed, u64::MAX / 2, 0);
    let mut out = Vec::new();
    let mut tried = 0;
    while out.len() < size {
        tried += 1;
        if tried > 1000 * size.max(1) {
            return Err(Error::Convergence { iterations: tried, residual: out.len() as f64 });
        }
        let p = sample_arcsine_strategy(&mut rng);
        if endpoint_distribution(&p, g, screen, Learner::Pga, cfg, seed)?.clusters.len() > 1 {
            out.push(p);
        }
    }
    Ok(out)
}

fn cmd_noise(ctx: &Ctx, flags: &NoiseArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["sweep", "noise"])?;
    let g = game_of(&a.game)?;
    let cfg = a.learner.config()?;
    let pga = LearnerConfig::default();
    let screen = a.screen_samples.unwrap_or(100);
    let panel = match a.panel.unwrap_or(Panel::Pczd) {
        Panel::Pczd => {
            let chis = chi_grid(1.0, 20.0, 1.0)?;
            multi_endpoint_strategies(&pczd_sweep(&g, &chis, 5, screen, ctx.seed, &pga)?)
        }
        Panel::General => general_panel(&g, a.panel_size.unwrap_or(100), screen, ctx.seed, &pga)?,
    };
    let report = lrs_noise_sweep(&panel, &g, &default_noise_eps(), a.n_q0.unwrap_or(200), ctx.seed, &cfg)?;
    let value = with_config(serde_json::to_value(&report)?, config, ctx.seed);
    if let Some(dir) = &a.output.out_dir {
        prepare_dir(dir)?;
        write_json(&dir.join("report.json"), &value)?;
    }
    Ok(Outcome::ok(value))
}

fn default_games() -> Vec<Vec4> {
    vec![Vec4([2.0, -1.0, 7.0, 0.0]), Vec4([3.0, 0.0, 5.0, 1.0]), Vec4([4.0, 0.0, 5.0, 3.0])]
}

fn cmd_tremble(ctx: &Ctx, flags: &TrembleArgs) -> Result<Outcome> {
    let (a, config) = resolve(flags, ctx.file.as_ref(), &["sweep", "tremble"])?;
    let games = a
        .games
        .clone()
        .unwrap_or_else(default_games)
        .iter()
        .map(|v| GameParams::from_array(v.0))
        .collect::<Result<Vec<_>>>()?;
    let mut learner = a.learner.clone();
    learner.error_rate = Some(learner.error_rate.unwrap_or(1e-3));
    let cfg = learner.config()?;
    let report = trembling_sweep(&games, a.n_p.unwrap_or(50), a.n_q0.unwrap_or(50), cfg.error_rate, ctx.seed, &cfg)?;
    let value = with_config(serde_json::to_value(&report)?, config, ctx.seed);
    if let Some(dir) = &a.output.out_dir {
        prepare_dir(dir)?;
        write_json(&dir.join("report.json"), &value)?;
    }
    Ok(Outcome::ok(value))
}

pub const FIG2_GAME: [f64; 4] = [2.0, -1.0, 7.0, 0.0];
pub const FIG2_P: [f64; 4] = [1.0, 0.12, 0.88, 0.0];
pub const FIG3B_GAME: [f64; 4] = [4.0, 0.0, 5.0, 3.0];
pub const FIG3B_P: [f64; 4] = [1.0, 0.85, 0.15, 0.0];
pub const FIG4_GAME: [f64; 4] = [3.0, 0.0, 5.0, 1.0];
pub const FIG4A_P: [f64; 4] = [0.997, 0.005, 0.018, 0.015];
pub const FIG4B_P: [f64; 4] = [0.860, 0.0, 0.225, 0.252];
pub const FIG1_GAME: [f64; 4] = [1.0, -1.0, 2.0, 0.0];

fn cmd_replicate(ctx: &Ctx, flags: &ReplicateArgs) -> Result<Outcome> {
    let (a, mut config) = resolve(flags, ctx.file.as_ref(), &["replicate"])?;
    let bins = a.bins.unwrap_or(100);
    let census = |game: [f64; 4], p: [f64; 4], title: &str, config: Value| -> Result<Outcome> {
        let g = GameParams::from_array(game)?;
        let p = MemoryOneStrategy::new(p)?;
        let c = endpoint_distribution(&p, &g, a.samples.unwrap_or(10_000), Learner::Pga, &LearnerConfig::default(), ctx.seed)?;
        let mut out = census_outcome(ctx, c, &g, bins, &a.output, config, title)?;
        out.report["game"] = json!(game);
        out.report["p"] = json!(p.probs());
        Ok(out)
    };
    config["figure"] = serde_json::to_value(a.figure)?;
    match a.figure {
        Figure::Fig3a => census(FIG2_GAME, FIG2_P, "fig3a", config),
        Figure::Fig3b => census(FIG3B_GAME, FIG3B_P, "fig3b", config),
        Figure::Fig4a => census(FIG4_GAME, FIG4A_P, "fig4a", config),
        Figure::Fig4b => census(FIG4_GAME, FIG4B_P, "fig4b", config),
        Figure::Fig1f => {
            let g = GameParams::from_array(FIG1_GAME)?;
            let n = a.samples.unwrap_or(10_000);
            let points = payofflab::parallel::map_indexed(n, |i| {
                let p = sample_arcsine_strategy(&mut task_rng(ctx.seed, 0, i as u64));
                feasible_region(&p, &g).rightmost
            });
            let grid = heatmap_grid(&points, &g, bins)?;
            let exploitable = points.iter().filter(|pt| pt.pi_x < pt.pi_y - 1e-9).count();
            let fair = points.iter().filter(|pt| (pt.pi_x - pt.pi_y).abs() < 1e-9).count();
            let report = with_config(
                json!({
                    "game": FIG1_GAME,
                    "n_strategies": n,
                    "nonzero_bins": grid.nonzero_bins(),
                    "exploitable_fraction": exploitable as f64 / n as f64,
                    "fair_fraction": fair as f64 / n as f64,
                    "exploiting_fraction": (n - exploitable - fair) as f64 / n as f64,
                }),
                config,
                ctx.seed,
            );
            if let Some(dir) = &a.output.out_dir {
                prepare_dir(dir)?;
                write_json(&dir.join("report.json"), &report)?;
                write_text(&dir.join("heatmap.svg"), &svg::heatmap_svg(&grid, &g, "fig1f"))?;
            }
            Ok(Outcome::ok(report))
        }
        Figure::Fig2 => {
            let g = GameParams::from_array(FIG2_GAME)?;
            let p = MemoryOneStrategy::new(FIG2_P)?;
            let cfg = LearnerConfig::default();
            // the first arcsine start, in run order, that lands in each basin
            let mut found: Vec<(PayoffPair, u64)> = Vec::new();
            let targets = [(200, 200), (267, 267), (279, 279)];
            for run in 0..10_000u64 {
                let (_, t) = single_run(&p, &g, Learner::Pga, &LearnerConfig { thinning: u64::MAX, ..cfg }, ctx.seed, 0, run)?;
                let key = t.endpoint_payoff.key_2dp();
                if targets.contains(&key) && !found.iter().any(|(pp, _)| pp.key_2dp() == key) {
                    found.push((t.endpoint_payoff, run));
                }
                if found.len() == targets.len() {
                    break;
                }
            }
            found.sort_by(|a, b| a.0.pi_y.total_cmp(&b.0.pi_y));
            let mut panels = Vec::new();
            for (label, (_, run)) in ["a", "b", "c"].iter().zip(&found) {
                let (q0, t) = single_run(&p, &g, Learner::Pga, &cfg, ctx.seed, 0, *run)?;
                if let Some(dir) = &a.output.out_dir {
                    prepare_dir(dir)?;
                    let line = comment(&config, ctx.seed);
                    write_text(&dir.join(format!("fig2{label}.csv")), &trajectory_csv(&t, &line)?)?;
                    write_text(&dir.join(format!("fig2{label}.svg")), &svg::trajectory_svg(Some(&t), &format!("fig2{label}")))?;
                }
                let mut v = trajectory_report(&t, &q0);
                v["run"] = json!(run);
                panels.push(v);
            }
            let report = with_config(json!({ "game": FIG2_GAME, "p": FIG2_P, "panels": panels }), config, ctx.seed);
            if let Some(dir) = &a.output.out_dir {
                write_json(&dir.join("report.json"), &report)?;
            }
            Ok(Outcome::ok(report))
        }
        Figure::Fig5 => {
            let g = GameParams::from_array(FIG4_GAME)?;
            let p = MemoryOneStrategy::new(FIG4A_P)?;
            let control = find_tremble_control(
                &p,
                &g,
                PayoffPair::new(1.06, 0.99),
                PayoffPair::new(2.57, 3.29),
                1e-3,
                ctx.seed,
                a.samples.unwrap_or(200) as u64,
                &LearnerConfig::default(),
            )?
            .ok_or_else(|| Error::Convergence { iterations: a.samples.unwrap_or(200), residual: f64::NAN })?;
            let report = with_config(serde_json::to_value(&control)?, config.clone(), ctx.seed);
            if let Some(dir) = &a.output.out_dir {
                prepare_dir(dir)?;
                write_json(&dir.join("report.json"), &report)?;
                let q0 = MemoryOneStrategy::new(control.q0)?;
                let line = comment(&config, ctx.seed);
                for (label, eps) in [("a", 0.0), ("b", 1e-3)] {
                    let cfg = LearnerConfig { error_rate: eps, thinning: 10, ..Default::default() };
                    let t = pga_run(&p, &q0, &g, &cfg)?;
                    write_text(&dir.join(format!("fig5{label}.csv")), &trajectory_csv(&t, &line)?)?;
                    write_text(&dir.join(format!("fig5{label}.svg")), &svg::trajectory_svg(Some(&t), &format!("fig5{label}")))?;
                }
            }
            Ok(Outcome::ok(report))
        }
    }
}
