//! Command-line front end. Exit codes: 0 success, 1 assumption or tolerance
//! failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::Error;
use crate::exosystem::{check_admissibility, ConditionStatus};
use crate::io;
use crate::regulator::{
    build_feedforward, build_feedforward_unchecked, check_assumption1, check_assumption2, residual_first_equation, residual_second_equation,
    transfer_function, Assumption1Report, Assumption2Report, FeedforwardGain, SylvesterSolution,
};
use crate::scenarios::{build_scenario, initial_exo_state, initial_state, Scenario, ScenarioConfig, StatePreset};
use crate::simulator::{decay_certificate, error_formula_check, simulate_closed_loop};
use crate::spectral::{check_geometric_condition, classify_decay, decay_envelope, DecayClass};
use crate::sylvester::{check_b_regularity, conformity_diagnostic, ColumnOperator, ConformityVerdict};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "modalreg", version, about = "Output regulation for diagonal infinite-dimensional plants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the solvability assumptions, conformity and the spectral condition.
    Check(CommonArgs),
    /// Build the feedforward gain and Pi; write L.csv, Pi.csv, residuals.txt.
    Solve(CommonArgs),
    /// Simulate the closed loop; write trajectory.csv.
    Simulate(CommonArgs),
    /// Fit decay exponents; write envelope.csv.
    Decay(CommonArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue past failed assumptions.
    #[arg(long)]
    pub force: bool,
    /// Seed for random scenarios.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of plant modes per side.
    #[arg(long)]
    pub modes: Option<i64>,
}

/// Outcome of a subcommand: exit code plus the summary printed to stdout.
struct Outcome {
    code: i32,
    summary: String,
}

/// An error that maps to a specific exit code.
struct Fail {
    code: i32,
    message: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Assumption1 { .. } => EXIT_FAILURE,
            _ => EXIT_USAGE,
        };
        Fail { code, message: e.to_string() }
    }
}

type CmdResult = std::result::Result<Outcome, Fail>;

struct Run {
    cfg: RunConfig,
    scenario: Scenario,
    out_dir: PathBuf,
    force: bool,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn prepare(args: &CommonArgs) -> std::result::Result<Run, Fail> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(modes) = args.modes {
        cfg.scenario.n_plant = modes;
    }
    let scenario = build_scenario(&cfg.scenario)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("modalreg-out"));
    std::fs::create_dir_all(&out_dir).map_err(|e| Fail { code: EXIT_USAGE, message: format!("cannot create {}: {e}", out_dir.display()) })?;
    Ok(Run { cfg, scenario, out_dir, force: args.force })
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_SUCCESS;
        }
    };
    let (args, cmd): (&CommonArgs, fn(&Run) -> CmdResult) = match &cli.command {
        Command::Check(a) => (a, cmd_check),
        Command::Solve(a) => (a, cmd_solve),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Decay(a) => (a, cmd_decay),
    };
    let result = prepare(args).and_then(|run| cmd(&run));
    match result {
        Ok(outcome) => {
            let _ = stdout.write_all(outcome.summary.as_bytes());
            outcome.code
        }
        Err(fail) => {
            let _ = writeln!(stderr, "error: {}", fail.message);
            fail.code
        }
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn describe(s: &Scenario, cfg: &RunConfig) -> String {
    let c = &cfg.scenario;
    let mut line = format!(
        "scenario: {} (plant modes = {}, exosystem modes = {}, period = {}, gamma = {}",
        s.kind,
        s.gen.modes().len(),
        s.space.modes().len(),
        s.space.period(),
        s.space.gamma().unwrap_or(c.gamma)
    );
    match s.kind {
        crate::scenarios::ScenarioKind::Wave => {
            let _ = write!(line, ", nu = {}", c.nu);
        }
        crate::scenarios::ScenarioKind::Random => {
            let _ = write!(line, ", seed = {}", c.seed);
        }
        _ => {}
    }
    line.push_str(")\n");
    line
}

fn assumption1_line(a1: &Assumption1Report) -> String {
    let mut line = format!(
        "[{}] Assumption 1: min |H(i omega_k)| = {:.6e} at k = {} (floor {:.1e})",
        mark(a1.passes),
        a1.min_magnitude,
        a1.argmin,
        a1.floor
    );
    if let Some(r) = a1.tightest_resonance() {
        let _ = write!(line, "; closest resonance gap {:.6e} at k = {} (plant mode {})", r.min_gap, r.k, r.nearest_mode);
    }
    line.push('\n');
    line
}

fn assumption2_line(a2: &Assumption2Report) -> String {
    let exponent = a2.tail.exponent.map_or("n/a".to_string(), |e| format!("{e:.4}"));
    format!(
        "[{}] Assumption 2: sum |l_k / f_k|^2 = {:.6e}, tail exponent {}, {}\n",
        mark(a2.passes()),
        a2.tail.total,
        exponent,
        a2.tail.verdict
    )
}

fn write_partial_sums(path: &Path, a2: &Assumption2Report) -> crate::Result<()> {
    let mut prev = 0.0;
    let rows = a2.tail.partial_sums.iter().map(|&(k, s)| {
        let row = vec![k as f64, s - prev, s];
        prev = s;
        row
    });
    io::write_table(path, &["k", "term", "partial_sum"], rows.collect::<Vec<_>>())
}

/// Alpha used for conformity: nominal, else the geometric exponent, else 1.
fn conformity_alpha(s: &Scenario) -> f64 {
    s.nominal_alpha.or(s.geometric.map(|g| g.0)).unwrap_or(1.0)
}

fn cmd_check(run: &Run) -> CmdResult {
    let s = &run.scenario;
    let tol = &run.cfg.tolerances;
    let mut report = describe(s, &run.cfg);
    let mut failures: Vec<&str> = Vec::new();

    let a1 = check_assumption1(&s.gen, &s.coupling, &s.space, tol.assumption1_floor)?;
    report.push_str(&assumption1_line(&a1));
    if !a1.passes {
        failures.push("Assumption 1");
    }

    if let Some((alpha, c)) = s.geometric {
        let g = check_geometric_condition(&s.gen, alpha, c, tol.geometric_d)?;
        let _ = writeln!(
            report,
            "[{}] spectral condition Re mu <= -c / |Im mu|^alpha (alpha = {alpha}, c = {c:.6}, d = {:.6}; {} modes checked)",
            mark(g.passes),
            tol.geometric_d,
            g.checks.len()
        );
        if !g.passes {
            failures.push("spectral condition");
        }
    }

    let adm = check_admissibility(&s.space);
    let weights = s.space.weight_summability();
    let _ = writeln!(
        report,
        "[INFO] exosystem: Dirac constant {:.6e}; sum f_k^-2 {}; discrete spectrum {}; finite-dimensional approximants {}",
        s.space.dirac_constant(),
        weights.verdict,
        status(adm.discrete_spectrum),
        status(adm.finite_dimensional)
    );

    if a1.passes {
        let gain = build_feedforward(&s.gen, &s.coupling, &s.space, tol.assumption1_floor)?;
        let a2 = check_assumption2(&gain, &s.space)?;
        report.push_str(&assumption2_line(&a2));
        if !a2.passes() {
            failures.push("Assumption 2");
        }
        write_partial_sums(&run.path("assumption2_partial_sums.csv"), &a2)?;

        let alpha = conformity_alpha(s);
        let eps = run.cfg.conformity_eps;
        let delta = ColumnOperator::forcing(&s.coupling, &gain)?;
        let conf = conformity_diagnostic(&s.gen, &delta, &s.space, alpha, eps, &run.cfg.quadrature)?;
        let ok = conf.verdict != ConformityVerdict::NonConformTrend;
        let label = if conf.verdict == ConformityVerdict::Inconclusive { "WARN" } else { mark(ok) };
        let _ = writeln!(report, "[{label}] conformity of B L + P: {} (beta = alpha + eps = {})", conf.verdict, alpha + eps);
        if let Some(ev) = &conf.sufficient_condition {
            let _ = writeln!(
                report,
                "       weighted norm bounds: column sup {:.6e} <= ||Delta|| <= {:.6e}; mode tail {}, frequency tail {}",
                ev.column_sup, ev.hilbert_schmidt, ev.mode_tail.verdict, ev.frequency_tail.verdict
            );
        }
        let _ = writeln!(report, "       truncation note: verdicts describe norm trends, not boundedness of the untruncated operator");
        if !ok {
            failures.push("conformity");
        }
        io::write_table(
            &run.path("conformity_tails.csv"),
            &["horizon", "tail_norm"],
            conf.tail_norms.iter().map(|&(t, v)| vec![t, v]).collect::<Vec<_>>(),
        )?;

        let breg = check_b_regularity(&s.gen, s.coupling.b(), &[alpha + eps])?;
        for entry in &breg {
            let _ = writeln!(report, "[INFO] input vector in D((-A)^{}): {}", entry.beta, entry.tail.verdict);
        }
    } else {
        let _ = writeln!(report, "[SKIP] Assumption 2 and conformity need Assumption 1");
    }

    let code = if failures.is_empty() { EXIT_SUCCESS } else { EXIT_FAILURE };
    if failures.is_empty() {
        report.push_str("result: PASS\n");
    } else {
        let _ = writeln!(report, "result: FAIL ({})", failures.join(", "));
    }
    io::write_text(&run.path("check_report.txt"), &report)?;
    Ok(Outcome { code, summary: report })
}

fn status(s: ConditionStatus) -> &'static str {
    match s {
        ConditionStatus::Holds => "holds",
        ConditionStatus::Unevaluated => "not evaluated",
    }
}

struct Solved {
    gain: FeedforwardGain,
    pi: SylvesterSolution,
    residuals: (f64, f64),
    report: String,
    /// Assumption failures tolerated because of `--force`.
    forced: bool,
}

fn solve_pipeline(run: &Run) -> std::result::Result<Solved, Fail> {
    let s = &run.scenario;
    let tol = &run.cfg.tolerances;
    let mut report = describe(s, &run.cfg);
    let a1 = check_assumption1(&s.gen, &s.coupling, &s.space, tol.assumption1_floor)?;
    report.push_str(&assumption1_line(&a1));
    let gain = if a1.passes {
        build_feedforward(&s.gen, &s.coupling, &s.space, tol.assumption1_floor)?
    } else if run.force {
        build_feedforward_unchecked(&s.gen, &s.coupling, &s.space)?
    } else {
        return Err(Fail { code: EXIT_FAILURE, message: format!("{}Assumption 1 fails; rerun with --force to continue", report) });
    };
    let a2 = check_assumption2(&gain, &s.space)?;
    report.push_str(&assumption2_line(&a2));
    if !a2.passes() && !run.force {
        return Err(Fail { code: EXIT_FAILURE, message: format!("{}Assumption 2 fails; rerun with --force to continue", report) });
    }
    let forced = !a1.passes || !a2.passes();
    if forced {
        report.push_str("WARN ---------------------------------------------\n");
        report.push_str("WARN assumptions failed; results forced with --force\n");
        report.push_str("WARN ---------------------------------------------\n");
    }
    let pi = crate::regulator::solve_regulator(&s.gen, &s.coupling, &gain, &s.space)?;
    let r1 = residual_first_equation(&pi, &s.gen, &s.coupling, &gain, &s.space)?;
    let r2 = residual_second_equation(&pi, &s.coupling, &s.space)?;
    Ok(Solved { gain, pi, residuals: (r1, r2), report, forced })
}

fn cmd_solve(run: &Run) -> CmdResult {
    let s = &run.scenario;
    let tol = &run.cfg.tolerances;
    let solved = solve_pipeline(run)?;
    let (r1, r2) = solved.residuals;
    let ok = r1 <= tol.residual && r2 <= tol.residual;
    let mut report = solved.report;
    let _ = writeln!(report, "[{}] residual of A Pi + B L + P = Pi S: {:.6e}", mark(r1 <= tol.residual), r1);
    let _ = writeln!(report, "[{}] residual of C Pi = delta_0: {:.6e}", mark(r2 <= tol.residual), r2);
    let _ = writeln!(report, "[INFO] ||Pi||_(W -> Z) estimate: {:.6e}", solved.pi.operator_norm_estimate());
    let tail = s
        .space
        .modes()
        .indices()
        .iter()
        .map(|&k| transfer_function(&s.gen, &s.coupling, num_complex::Complex64::new(0.0, s.space.omega(k))).map(|t| t.boundary_contribution))
        .collect::<crate::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let _ = writeln!(report, "[INFO] largest transfer-function contribution of the outer modes: {tail:.6e}");
    let _ = writeln!(report, "result: {}", mark(ok));
    io::write_gain(&run.path("L.csv"), &solved.gain)?;
    io::write_pi(&run.path("Pi.csv"), &solved.pi)?;
    io::write_text(&run.path("residuals.txt"), &report)?;
    Ok(Outcome { code: if ok { EXIT_SUCCESS } else { EXIT_FAILURE }, summary: report })
}

fn cmd_simulate(run: &Run) -> CmdResult {
    let s = &run.scenario;
    let tol = &run.cfg.tolerances;
    let solved = solve_pipeline(run)?;
    let w0 = initial_exo_state(&run.cfg.scenario.w0, &s.space)?;
    let z0 = initial_state(&run.cfg.scenario.z0, &s.gen, &w0, Some(&solved.pi))?;
    let grid = run.cfg.simulate.grid()?;
    let result = simulate_closed_loop(&s.gen, &s.coupling, &solved.gain, &z0, &w0, &grid)?;
    io::write_trajectory(&run.path("trajectory.csv"), &result)?;
    io::write_indexed_complex(&run.path("w0.csv"), "k", w0.iter())?;

    let mut report = solved.report;
    let mut ok = true;
    let last = *grid.last().expect("grid has points");
    let final_sup = result.sup_error_on(last / 10.0, last);
    let _ = writeln!(report, "[INFO] sup |e| on [{}, {}]: {:.6e}", last / 10.0, last, final_sup);
    if let Some(ratio) = result.final_decade_ratio() {
        let _ = writeln!(report, "[INFO] final-decade sup |e| / initial sup |e|: {ratio:.6e}");
    }
    let formula = error_formula_check(&result, &solved.pi, &s.gen, &s.coupling)?;
    let formula_ok = formula <= tol.error_formula;
    ok &= formula_ok || solved.forced;
    let _ = writeln!(report, "[{}] explicit error formula mismatch: {:.6e}", mark(formula_ok), formula);
    if run.cfg.scenario.z0 == StatePreset::OnManifold {
        let sup = result.sup_error_on(0.0, f64::INFINITY);
        let manifold_ok = sup <= tol.invariant_error;
        ok &= manifold_ok;
        let _ = writeln!(report, "[{}] z0 = Pi w0: sup |e| = {:.6e}", mark(manifold_ok), sup);
    }
    match s.nominal_alpha.map(|alpha| (alpha, decay_certificate(&result, alpha, run.cfg.simulate.window))) {
        Some((alpha, Ok(cert))) => {
            let slope = cert.error_slope().map_or("n/a".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(
                report,
                "[INFO] decay on [{}, {}]: error envelope slope {}, {}; state deviation slope {:.4} (bound -1/alpha = {:.4}, {}); m = {:.6e}",
                cert.window.0,
                cert.window.1,
                slope,
                if cert.error_decreasing { "decreasing" } else { "not decreasing" },
                cert.state_slope(),
                -1.0 / alpha,
                if cert.passes() { "within bound" } else { "slower than bound" },
                cert.m
            );
        }
        Some((_, Err(e))) => {
            let _ = writeln!(report, "[INFO] decay certificate unavailable: {e}");
        }
        None => {}
    }
    let _ = writeln!(report, "result: {}", mark(ok));
    io::write_text(&run.path("simulate_report.txt"), &report)?;
    Ok(Outcome { code: if ok { EXIT_SUCCESS } else { EXIT_FAILURE }, summary: report })
}

fn cmd_decay(run: &Run) -> CmdResult {
    let s = &run.scenario;
    let tol = &run.cfg.tolerances;
    let spec = &run.cfg.decay;
    let grid = spec.grid()?;
    let beta = run.cfg.decay_beta;
    let fine = build_scenario(&ScenarioConfig { n_plant: run.cfg.envelope_modes.max(run.cfg.scenario.n_plant), ..run.cfg.scenario.clone() })?;
    let env = decay_envelope(&fine.gen, beta, &grid)?;
    let class = classify_decay(&env.values, &grid, spec.window)?;
    let mut report = describe(s, &run.cfg);
    let _ = writeln!(report, "[INFO] semigroup envelope uses {} plant modes", fine.gen.modes().len());
    let mut ok = true;
    match (&class, s.nominal_alpha) {
        (DecayClass::Polynomial(fit), Some(alpha)) => {
            let expected = beta / alpha;
            let pass = (fit.exponent - expected).abs() <= tol.slope;
            ok &= pass;
            let _ = writeln!(
                report,
                "[{}] semigroup envelope exponent {:.4} (expected {:.4} +- {}, {} fit points)",
                mark(pass),
                fit.exponent,
                expected,
                tol.slope,
                fit.points
            );
        }
        (DecayClass::Polynomial(fit), None) => {
            let _ = writeln!(report, "[INFO] semigroup envelope exponent {:.4} ({} fit points)", fit.exponent, fit.points);
        }
        (DecayClass::Superpolynomial { early_exponent, late_exponent }, nominal) => {
            ok &= nominal.is_none();
            let _ = writeln!(
                report,
                "[{}] semigroup envelope: superpolynomial (early exponent {}, late exponent {})",
                if nominal.is_none() { "INFO" } else { "FAIL" },
                early_exponent.map_or("n/a".into(), |v| format!("{v:.4}")),
                late_exponent.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
        }
    }
    if env.touches_boundary() {
        let _ = writeln!(report, "[WARN] envelope maximizer reached the outermost retained mode at {} grid times", env.boundary_hits.len());
    }

    let solved = solve_pipeline(run)?;
    let w0 = initial_exo_state(&run.cfg.scenario.w0, &s.space)?;
    let z0 = initial_state(&run.cfg.scenario.z0, &s.gen, &w0, Some(&solved.pi))?;
    let result = simulate_closed_loop(&s.gen, &s.coupling, &solved.gain, &z0, &w0, &grid)?;
    io::write_table(
        &run.path("envelope.csv"),
        &["t", "semigroup_envelope", "error_envelope", "state_dev_envelope"],
        (0..grid.len())
            .map(|i| vec![grid[i], env.values[i], result.e[i].norm(), result.state_dev[i]])
            .collect::<Vec<_>>(),
    )?;
    let alpha = conformity_alpha(s);
    match decay_certificate(&result, alpha, spec.window) {
        Ok(cert) => {
            let _ = writeln!(
                report,
                "[INFO] state deviation slope {:.4} vs bound {:.4} ({}); error envelope slope {}; m = {:.6e}",
                cert.state_slope(),
                cert.target_slope,
                if cert.passes() { "within bound" } else { "slower than bound" },
                cert.error_slope().map_or("n/a".into(), |v| format!("{v:.4}")),
                cert.m
            );
        }
        Err(Error::InsufficientWindow { needed, got }) => {
            return Err(Fail { code: EXIT_USAGE, message: format!("decay window holds {got} envelope points, need {needed}") });
        }
        Err(e) => {
            let _ = writeln!(report, "[INFO] decay certificate unavailable: {e}");
        }
    }
    let _ = writeln!(report, "result: {}", mark(ok));
    io::write_text(&run.path("decay_report.txt"), &report)?;
    Ok(Outcome { code: if ok { EXIT_SUCCESS } else { EXIT_FAILURE }, summary: report })
}
