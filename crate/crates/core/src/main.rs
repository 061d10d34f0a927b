use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use yamabe_lab::blowup::{self, ReducedFunctional};
use yamabe_lab::bubble::{Bubble, CutOff, HalfSpacePoint};
use yamabe_lab::cli_io::run::{reference_coefficients, reference_form};
use yamabe_lab::cli_io::{
    export_plot_data, load_record, resolve_output_dir, run, threads_from_env, verify, write_artifacts, write_table,
    ResultRecord, RunConfig, Stage, Status, Table, EXPORTABLE,
};
use yamabe_lab::corrector::GridSpec;
use yamabe_lab::energy::expansion::{boundary_term_expansion_check, lambda_shift};
use yamabe_lab::energy::mc::{energy_direct_mc, flat_energy_exact, McOptions};
use yamabe_lab::energy::residual::{ansatz_residual_orders, ResidualOptions};
use yamabe_lab::energy::{self, FermiMetricJet, LambdaPower};
use yamabe_lab::exponents::{check_admissible, exponents_for, fmt_rational, parse_rational};
use yamabe_lab::form::TracelessSymmetricForm;
use yamabe_lab::special::{integral_table, sample_parameters};
use yamabe_lab::{Error, Result};

/// Numerical laboratory for supercritical boundary Yamabe blow-up.
///
/// Exit status: 0 all checks pass, 1 a check failed, 2 error, 3 a check was flagged.
#[derive(Parser)]
#[command(name = "yamabe-lab", version)]
struct Cli {
    /// Output directory (overrides YAMABE_LAB_OUT_DIR and the config value).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (overrides YAMABE_LAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact trace and regularity exponents for a rational eps.
    Exponents {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        eps: String,
    },
    /// Closed form, quadrature and recursion residuals of I_m^alpha on the sample grid.
    Integrals,
    /// Bubble and kernel profile along a ray (columns: coordinate, U, j_1..j_n).
    Bubble {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value = "normal")]
        ray: Ray,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        /// Largest coordinate sampled.
        #[arg(long, default_value_t = 1.0)]
        extent: f64,
    },
    /// Solve the reduced corrector problem and run its checks.
    Corrector {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    #[command(subcommand)]
    Energy(EnergyCommand),
    #[command(subcommand)]
    Blowup(BlowupCommand),
    /// Execute the stages of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Full check suite under the reference configuration.
    Verify {
        #[arg(long, default_value_t = 7)]
        n: usize,
        /// Also run the Monte Carlo energy with this many samples.
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Write one table of a saved record as CSV.
    Export {
        #[arg(long)]
        record: PathBuf,
        /// One of: integrals, corrector_w, residual_sweep, rate_table, profiles_normal, profiles_tangential.
        #[arg(long)]
        what: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Ray {
    Normal,
    Tangent,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long = "Rr", default_value_t = GridSpec::default().r_max)]
    r_max: f64,
    #[arg(long = "Rt", default_value_t = GridSpec::default().t_max)]
    t_max: f64,
    #[arg(long, default_value_t = GridSpec::default().dr)]
    dr: f64,
    #[arg(long, default_value_t = GridSpec::default().dt)]
    dt: f64,
    #[arg(long, default_value_t = GridSpec::default().grading)]
    grading: f64,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec { r_max: self.r_max, t_max: self.t_max, dr: self.dr, dt: self.dt, grading: self.grading }
    }
}

#[derive(Subcommand)]
enum EnergyCommand {
    /// A, C and the B(eps) coefficients.
    Coefficients {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// phi(h) for a traceless form read from a CSV of rows (no header).
    Phi {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        h: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Fit of the boundary-term difference against eps |ln eps| and eps.
    CheckExpansion {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<String>>,
        #[arg(long, default_value_t = 1.0)]
        cutoff: f64,
    },
    /// L^q residual of the ansatz with and without the corrector.
    ResidualOrders {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.01, 0.005, 0.0025])]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        cutoff: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo estimate of the energy of the flat ansatz.
    Mc {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, default_value = "1/100000000")]
        eps: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        p: u32,
        /// Estimate without the control variate.
        #[arg(long)]
        plain: bool,
    },
}

#[derive(Subcommand)]
enum BlowupCommand {
    /// Maximize the reduced functional over the model boundary.
    Search {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build the blow-up family and certify its rate.
    Family {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the eps list of the config (rationals or decimals).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<String>>,
    },
}

struct Ctx {
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn dir(&self, config_dir: Option<&Path>) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| resolve_output_dir(config_dir))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let dir = self.dir(None);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
        Ok(path)
    }

    fn write_csv(&self, name: &str, table: &Table) -> Result<PathBuf> {
        let dir = self.dir(None);
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(name);
        write_table(table, &path)?;
        Ok(path)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(status) => ExitCode::from(match status {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Flag => 3,
        }),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<Status> {
    let threads = match cli.threads {
        Some(t) if t > 0 => Some(t),
        Some(_) => return Err(Error::InvalidArgument("--threads must be positive".into())),
        None => threads_from_env()?,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let ctx = Ctx { out_dir: cli.out_dir };
    match cli.command {
        Command::Exponents { n, eps } => cmd_exponents(&ctx, n, &eps),
        Command::Integrals => cmd_integrals(&ctx),
        Command::Bubble { n, delta, ray, samples, extent } => cmd_bubble(&ctx, n, delta, ray, samples, extent),
        Command::Corrector { n, grid } => {
            let mut config = RunConfig::default_for(n);
            config.grid = grid.spec();
            config.stages = vec![Stage::Corrector];
            finish_run(&ctx, &config)
        }
        Command::Energy(e) => cmd_energy(&ctx, e),
        Command::Blowup(b) => cmd_blowup(&ctx, b),
        Command::Run { config } => finish_run(&ctx, &RunConfig::load(&config)?),
        Command::Verify { n, mc_samples } => {
            let rec = if mc_samples.is_some() {
                let mut config = RunConfig::default_for(n);
                config.mc_samples = mc_samples;
                run(&config)?
            } else {
                verify(n)?
            };
            report(&ctx, &rec, None)
        }
        Command::Export { record, what } => {
            if !EXPORTABLE.contains(&what.as_str()) {
                return Err(Error::InvalidArgument(format!("unknown table '{what}', expected one of {EXPORTABLE:?}")));
            }
            let rec = load_record(&record)?;
            println!("{}", export_plot_data(&rec, &what, &ctx.dir(None))?.display());
            Ok(Status::Pass)
        }
    }
}

fn finish_run(ctx: &Ctx, config: &RunConfig) -> Result<Status> {
    let rec = run(config)?;
    report(ctx, &rec, config.output_dir.as_deref())
}

fn report(ctx: &Ctx, rec: &ResultRecord, config_dir: Option<&Path>) -> Result<Status> {
    for c in &rec.checks {
        let value = c.value.map(|v| format!("{v:e}")).unwrap_or_else(|| "-".into());
        let tol = c.tolerance.map(|v| format!("{v:e}")).unwrap_or_else(|| "-".into());
        println!("{:<5} {:<36} value={value:<24} tol={tol:<10} {}", format!("{:?}", c.status).to_uppercase(), c.name, c.detail);
    }
    let dir = ctx.dir(config_dir);
    write_artifacts(rec, &dir)?;
    println!("run {} written to {}", rec.run_id, dir.display());
    Ok(rec.worst_status())
}

fn cmd_exponents(ctx: &Ctx, n: u32, eps: &str) -> Result<Status> {
    let eps = parse_rational(eps)?;
    let e = exponents_for(n, &eps)?;
    let adm = check_admissible(&e);
    println!("n = {n}, eps = {}", fmt_rational(&e.eps));
    println!("s_eps = {} ({})", fmt_rational(&e.s_eps), e.s_eps_f64());
    println!("q     = {} ({})", fmt_rational(&e.q), e.q_f64());
    println!("r     = {} ({})", fmt_rational(&e.r), e.r_f64());
    println!("identities hold exactly: {}", e.identities_hold());
    for m in &adm.margins {
        println!("  {:<14} margin {} ({:e}) {}", m.inequality, m.margin, m.margin_f64, if m.holds { "ok" } else { "violated" });
    }
    println!("admissible: {}{}", adm.admissible, if adm.critical_boundary { " (critical base point)" } else { "" });
    let record = json!({
        "n": n,
        "eps": fmt_rational(&e.eps),
        "s_eps": fmt_rational(&e.s_eps),
        "q": fmt_rational(&e.q),
        "r": fmt_rational(&e.r),
        "identities_hold": e.identities_hold(),
        "admissibility": adm,
    });
    let path = ctx.write_json("exponents.json", &record)?;
    println!("record written to {}", path.display());
    Ok(if e.identities_hold() && adm.admissible { Status::Pass } else { Status::Fail })
}

fn cmd_integrals(ctx: &Ctx) -> Result<Status> {
    let rows = integral_table(&sample_parameters())?;
    let mut t = Table::new(&["m", "alpha", "closed_form", "quadrature", "rel_err", "recursion1_err", "recursion2_err", "recursion3_err"]);
    let mut worst: f64 = 0.0;
    for r in &rows {
        worst = worst.max(r.rel_err);
        t.push(vec![Some(r.m), Some(r.alpha), Some(r.closed_form), Some(r.quadrature), Some(r.rel_err), r.recursion1_err, r.recursion2_err, r.recursion3_err]);
    }
    let path = ctx.write_csv("integrals.csv", &t)?;
    println!("{} rows, max closed-form vs quadrature error {worst:e}, written to {}", rows.len(), path.display());
    Ok(if worst <= 1e-8 { Status::Pass } else { Status::Fail })
}

fn cmd_bubble(ctx: &Ctx, n: usize, delta: f64, ray: Ray, samples: usize, extent: f64) -> Result<Status> {
    if samples < 2 || extent.is_nan() || extent <= 0.0 {
        return Err(Error::InvalidArgument("need at least two samples and a positive extent".into()));
    }
    let bubble = Bubble::new(n, delta)?;
    let unit = Bubble::standard(n)?;
    let mut cols = vec!["coordinate".to_string(), "U".to_string()];
    cols.extend((1..=n).map(|b| format!("j_{b}")));
    let mut t = Table { columns: cols, rows: Vec::new() };
    for k in 0..samples {
        let s = extent * k as f64 / (samples - 1) as f64;
        let mut z = vec![0.0; n - 1];
        let y = match ray {
            Ray::Normal => HalfSpacePoint { z, t: s },
            Ray::Tangent => {
                z[0] = s;
                HalfSpacePoint { z, t: 0.0 }
            }
        };
        let x = y.scaled(1.0 / delta);
        let mut row = vec![Some(s), Some(bubble.value(&y))];
        row.extend((1..=n).map(|b| Some(unit.kernel_j(b, &x))));
        t.push(row);
    }
    let name = match ray {
        Ray::Normal => "bubble_normal.csv",
        Ray::Tangent => "bubble_tangent.csv",
    };
    println!("{}", ctx.write_csv(name, &t)?.display());
    Ok(Status::Pass)
}

fn cmd_energy(ctx: &Ctx, cmd: EnergyCommand) -> Result<Status> {
    match cmd {
        EnergyCommand::Coefficients { n, grid } => {
            let (_, coeffs) = reference_coefficients(n, &grid.spec())?;
            let out = json!({
                "coefficients": coeffs,
                "a_quadrature": energy::a_quadrature(n)?,
                "c_via_boundary_mass": energy::c_via_boundary_mass(n)?,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            ctx.write_json("energy_coefficients.json", &out)?;
            Ok(if coeffs.a > 0.0 && coeffs.c > 0.0 { Status::Pass } else { Status::Fail })
        }
        EnergyCommand::Phi { n, h, grid } => {
            let form = read_form(n, &h)?;
            let (_, coeffs) = reference_coefficients(n, &grid.spec())?;
            let phi = energy::phi(&form, &coeffs);
            let out = json!({ "n": n, "norm_sq": form.norm_sq(), "phi": phi, "phi_n": coeffs.phi_n });
            println!("{}", serde_json::to_string_pretty(&out)?);
            ctx.write_json("energy_phi.json", &out)?;
            Ok(if phi <= 0.0 { Status::Pass } else { Status::Fail })
        }
        EnergyCommand::CheckExpansion { n, lambda, eps, cutoff } => {
            let eps = match eps {
                Some(list) => list.iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?,
                None => RunConfig::default_for(n).expansion_eps_f64()?,
            };
            let reports = lambda
                .iter()
                .map(|&l| boundary_term_expansion_check(n, l, &eps, cutoff))
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&["lambda", "eps", "delta", "difference"]);
            let mut worst: f64 = 0.0;
            for r in &reports {
                worst = worst.max(r.c1_rel_err);
                println!("lambda = {}: c1 = {:e} (expected {:e}, rel err {:.3e}), c2 = {:e} (expected {:e})", r.lambda, r.c1, r.c1_expected, r.c1_rel_err, r.c2, r.c2_expected);
                for s in &r.samples {
                    t.push(vec![Some(r.lambda), Some(s.eps), Some(s.delta), Some(s.difference)]);
                }
            }
            let shift = match reports.as_slice() {
                [a, b] if (b.lambda - 2.0 * a.lambda).abs() < 1e-12 => Some(lambda_shift(a, b)?),
                _ => None,
            };
            if let Some(s) = &shift {
                println!("lambda shift: observed {:e}, expected {:e}, rel err {:.3e}", s.observed, s.expected, s.rel_err);
                worst = worst.max(s.rel_err);
            }
            ctx.write_csv("expansion_sweep.csv", &t)?;
            ctx.write_json("expansion.json", &json!({ "reports": reports, "lambda_shift": shift }))?;
            Ok(if worst <= 0.05 { Status::Pass } else { Status::Fail })
        }
        EnergyCommand::ResidualOrders { n, deltas, cutoff, grid } => {
            let (profile, _) = reference_coefficients(n, &grid.spec())?;
            let jet = FermiMetricJet::from_form(reference_form(n)?);
            let res = ansatz_residual_orders(&jet, Some(&profile), &deltas, &CutOff::new(cutoff)?, &ResidualOptions::default())?;
            let mut t = Table::new(&["delta", "norm_without", "norm_with"]);
            for ((d, a), b) in res.deltas.iter().zip(&res.norm_without).zip(&res.norm_with) {
                t.push(vec![Some(*d), Some(*a), Some(*b)]);
            }
            ctx.write_csv("residual_sweep.csv", &t)?;
            ctx.write_json("residual_orders.json", &res)?;
            let (s1, s2) = (res.slope_without().unwrap_or(f64::NAN), res.slope_with().unwrap_or(f64::NAN));
            println!("slope without corrector {s1:.4}, with corrector {s2:.4}");
            if res.flagged {
                return Ok(Status::Flag);
            }
            Ok(if (s1 - 1.0).abs() <= 0.2 && (s2 - 2.0).abs() <= 0.2 { Status::Pass } else { Status::Fail })
        }
        EnergyCommand::Mc { n, eps, lambda, samples, seed, p, plain } => {
            let eps = parse_f64(&eps)?;
            let coeffs = energy::coefficients(n, 0.0)?;
            let opts = McOptions { samples, seed, stderr_budget: None, control_variate: !plain };
            let est = energy_direct_mc(&FermiMetricJet::flat(n), None, &coeffs, lambda, eps, LambdaPower::from_int(p)?, &CutOff::default(), &opts)?;
            let exact = flat_energy_exact(n, lambda, eps)?;
            println!("estimate {:e} +- {:e}; A = {:e} ({:.2} SE); exact flat energy {:e}", est.estimate, est.stderr, coeffs.a, est.z_score(coeffs.a), exact);
            ctx.write_json("energy_mc.json", &json!({ "estimate": est, "a": coeffs.a, "flat_exact": exact }))?;
            Ok(Status::Pass)
        }
    }
}

fn cmd_blowup(ctx: &Ctx, cmd: BlowupCommand) -> Result<Status> {
    let load = |path: &Option<PathBuf>| match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default_for(7)),
    };
    match cmd {
        BlowupCommand::Search { config } => {
            let config = load(&config)?;
            let (_, coeffs) = reference_coefficients(config.n, &config.grid)?;
            let field = config.field.build(config.n)?;
            let functional = ReducedFunctional::new(coeffs, config.power()?, config.window()?)?;
            let s = blowup::search(&field, &functional)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            let dir = ctx.dir(config.output_dir.as_deref());
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("search.json"), serde_json::to_string_pretty(&s)?)?;
            Ok(if !s.argmax_is_argmin {
                Status::Fail
            } else if s.degenerate {
                Status::Flag
            } else {
                Status::Pass
            })
        }
        BlowupCommand::Family { config, eps } => {
            let mut config = load(&config)?;
            if let Some(list) = eps {
                config.eps = list.iter().map(|s| parse_rational(s).map(|r| fmt_rational(&r))).collect::<Result<_>>()?;
            }
            config.stages = vec![Stage::Blowup];
            finish_run(ctx, &config)
        }
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    use num_traits::ToPrimitive;
    parse_rational(s)?
        .to_f64()
        .ok_or_else(|| Error::InvalidArgument(format!("{s} is not representable as f64")))
}

fn read_form(n: usize, path: &Path) -> Result<TracelessSymmetricForm> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| c.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{}: bad entry {c:?}: {e}", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    TracelessSymmetricForm::from_rows(n, &rows)
}
