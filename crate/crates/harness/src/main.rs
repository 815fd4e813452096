use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rvl_core::io::{read_sequence_csv, read_sparse, read_sparse_csv, write_orbit, write_orbit_csv, write_sparse_csv};
use rvl_core::iw::{eta_n, xi_partition, IWParams, DEFAULT_CHI, DEFAULT_SET_CAP};
use rvl_core::lattice::{build_gamma, enumerate_orbit, lift_polynomial, Lift, PolynomialMap, DEFAULT_ORBIT_CAP};
use rvl_core::numtheory::dirichlet_approx;
use rvl_core::operators::{apply_average, apply_singular, CZKernel, SparseFunction};
use rvl_core::variation::{oscillation, split_variation, vr_bruteforce, vr_dyadic_bound, vr_seq, IndexedSequence};

use rvl_harness::acceptance::{Options, Suite, Verdict};
use rvl_harness::cache::load_primes;
use rvl_harness::config::{ExperimentConfig, ALL_CHECKS};
use rvl_harness::experiments::{run_experiment, OrbitDesc, RunReport};

/// Discrete averages and singular integrals along polynomial orbits of primes.
#[derive(Parser)]
#[command(name = "rvl", version)]
struct Cli {
    /// Experiment config (TOML); experiment verbs use it as the base settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replaces every check bound.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct OrbitArgs {
    /// interval, cube or ball.
    #[arg(long)]
    body: Option<String>,
    /// Integer coordinates.
    #[arg(long)]
    kprime: Option<usize>,
    /// Prime coordinates.
    #[arg(long)]
    kdoubleprime: Option<usize>,
    /// Use `±` coordinates.
    #[arg(long)]
    signed: bool,
    #[arg(long)]
    degree: Option<u32>,
}

impl OrbitArgs {
    fn desc(&self) -> OrbitDesc {
        let d = OrbitDesc::default();
        OrbitDesc {
            body: self.body.clone().unwrap_or(d.body),
            kprime: self.kprime.unwrap_or(d.kprime),
            kdoubleprime: self.kdoubleprime.unwrap_or(d.kdoubleprime),
            signed: self.signed,
            degree: self.degree.unwrap_or(d.degree),
        }
    }

    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(b) = &self.body {
            c.set("body", b.as_str());
        }
        if let Some(k) = self.kprime {
            c.set("kprime", k as i64);
        }
        if let Some(k) = self.kdoubleprime {
            c.set("kdoubleprime", k as i64);
        }
        if self.signed {
            c.set("signed", true);
        }
        if let Some(d) = self.degree {
            c.set("degree", d as i64);
        }
    }
}

#[derive(Args)]
struct OperatorArgs {
    #[command(flatten)]
    orbit: OrbitArgs,
    #[arg(long)]
    n: u64,
    /// Sparse function (`.csv` rows `x_1..x_d0,re[,im]`, otherwise binary); a delta at the origin when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Polynomial map, components separated by `;`, terms by `+`, each term
    /// `coef:e1[,e2…]`; e.g. `1:1;1:2` is `(x, x^2)`. Defaults to the canonical map.
    #[arg(long)]
    poly: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sieve the primes up to a limit (cached under $RVL_SIEVE_CACHE).
    Sieve {
        #[arg(long, default_value_t = 100_000)]
        limit: u64,
        /// Also write the primes to `<out>/primes.csv`.
        #[arg(long)]
        csv: bool,
    },
    /// Enumerate an orbit and write it to `<out>/orbit.{bin,csv}`.
    Orbit {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long)]
        n: u64,
        /// bin or csv.
        #[arg(long, default_value = "bin")]
        format: String,
    },
    /// Apply the averaging operator; writes `<out>/average.csv`.
    ApplyAverage {
        #[command(flatten)]
        op: OperatorArgs,
        /// Drop the logarithmic prime weights.
        #[arg(long)]
        unweighted: bool,
    },
    /// Apply the truncated singular operator with the built-in kernel; writes `<out>/singular.csv`.
    ApplySingular {
        #[command(flatten)]
        op: OperatorArgs,
    },
    /// Multiplier values on a ξ-grid (experiment `multiplier-sweep`).
    MultiplierSweep {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        /// average, singular or continuous.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Maximal Gaussian sums per denominator (experiment `gauss-decay`).
    GaussScan {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long)]
        qmax: Option<u64>,
    },
    /// Minor-arc Weyl sums and regularity ratios (experiment `weyl-scan`).
    WeylScan {
        #[command(flatten)]
        orbit: OrbitArgs,
        /// Scales as powers of two, e.g. `10,11,12`.
        #[arg(long, value_delimiter = ',')]
        exponents: Option<Vec<i64>>,
        #[arg(long)]
        frequencies: Option<usize>,
    },
    /// r-variation of a sequence read from CSV (`index,re[,im]` or one column).
    Variation {
        input: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// dp, bruteforce, dyadic, split or oscillation.
        #[arg(long, default_value = "dp")]
        mode: String,
    },
    /// Denominator sets and disjointness (experiment `iw-build`).
    IwBuild {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<i64>>,
        #[arg(long)]
        beta: Option<u32>,
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Evaluate the cut-off and the partition function at a frequency.
    XiEval {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Vec<f64>,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        beta: u32,
        #[arg(long, default_value_t = DEFAULT_CHI)]
        chi: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Restrict to the level-`s` part.
        #[arg(long)]
        level: Option<u64>,
    },
    /// Telescoping identity and ℓ¹ ratio between two scales (experiment `telescoping`).
    Telescoping {
        #[command(flatten)]
        orbit: OrbitArgs,
        #[arg(long)]
        n1: u64,
        #[arg(long)]
        n2: u64,
        /// average or singular.
        #[arg(long, default_value = "average")]
        kind: String,
    },
    /// Run the experiment described by a config file.
    Run { config: Option<PathBuf> },
    /// Run the acceptance suite (all checks or one by name).
    Acceptance {
        #[arg(default_value = "all")]
        name: String,
        /// Fit the reference constants afresh.
        #[arg(long)]
        refit: bool,
        /// Where to write the JSON verdict (default `<out>/acceptance.json`).
        #[arg(long)]
        json: Option<PathBuf>,
        /// List the check names and exit.
        #[arg(long)]
        list: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.cmd {
        Cmd::Sieve { limit, csv } => sieve(&cli, *limit, *csv),
        Cmd::Orbit { orbit, n, format } => orbit_cmd(&cli, orbit, *n, format),
        Cmd::ApplyAverage { op, unweighted } => apply(&cli, op, Some(!*unweighted)),
        Cmd::ApplySingular { op } => apply(&cli, op, None),
        Cmd::MultiplierSweep { orbit, n, points, kind } => experiment(&cli, "multiplier-sweep", |c| {
            orbit.apply(c);
            if let Some(n) = n {
                c.set("n", *n as i64);
            }
            if let Some(p) = points {
                c.set("points", *p as i64);
            }
            if let Some(k) = kind {
                c.set("kind", k.as_str());
            }
        }),
        Cmd::GaussScan { orbit, qmax } => experiment(&cli, "gauss-decay", |c| {
            orbit.apply(c);
            if let Some(q) = qmax {
                c.set("qmax", *q as i64);
            }
        }),
        Cmd::WeylScan { orbit, exponents, frequencies } => experiment(&cli, "weyl-scan", |c| {
            orbit.apply(c);
            if let Some(e) = exponents {
                c.set("exponents", e.clone());
            }
            if let Some(f) = frequencies {
                c.set("frequencies", *f as i64);
            }
        }),
        Cmd::Variation { input, r, rho, mode } => variation(input, *r, *rho, mode),
        Cmd::IwBuild { orbit, levels, beta, chi, rho } => experiment(&cli, "iw-build", |c| {
            orbit.apply(c);
            if let Some(l) = levels {
                c.set("levels", l.clone());
            }
            if let Some(b) = beta {
                c.set("beta", *b as i64);
            }
            if let Some(x) = chi {
                c.set("chi", *x);
            }
            if let Some(x) = rho {
                c.set("rho", *x);
            }
        }),
        Cmd::XiEval { orbit, xi, n, beta, chi, rho, level } => xi_eval(orbit, xi, *n, *beta, *chi, *rho, *level),
        Cmd::Telescoping { orbit, n1, n2, kind } => experiment(&cli, "telescoping", |c| {
            orbit.apply(c);
            c.set("kind", kind.as_str());
            c.set("pairs", vec![vec![*n1 as i64, *n2 as i64]]);
        }),
        Cmd::Run { config } => {
            let path = config.as_ref().or(cli.config.as_ref()).context("run needs a config file")?;
            let mut c = ExperimentConfig::load(path)?;
            override_common(&cli, &mut c, false);
            report(run_experiment(&c)?)
        }
        Cmd::Acceptance { name, refit, json, list } => acceptance(&cli, name, *refit, json.as_deref(), *list),
    }
}

fn override_common(cli: &Cli, c: &mut ExperimentConfig, nest_out: bool) {
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(t) = cli.tolerance {
        c.tolerance.insert(ALL_CHECKS.to_string(), t);
    }
    if nest_out || cli.out != Path::new("results") {
        c.out = if nest_out { cli.out.join(&c.id) } else { cli.out.clone() };
    }
}

fn experiment(cli: &Cli, id: &str, set: impl FnOnce(&mut ExperimentConfig)) -> Result<bool> {
    let mut c = match &cli.config {
        Some(p) => {
            let c = ExperimentConfig::load(p)?;
            if c.id != id {
                bail!("{} describes experiment {:?}, not {id:?}", p.display(), c.id);
            }
            c
        }
        None => ExperimentConfig::new(id),
    };
    set(&mut c);
    override_common(cli, &mut c, true);
    report(run_experiment(&c)?)
}

fn report(r: RunReport) -> Result<bool> {
    for c in &r.checks {
        println!("{:<45} {}  {:.6e} (bound {:.3e})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.value, c.bound);
    }
    for (k, v) in &r.fitted {
        println!("{k} = {v}");
    }
    for a in &r.artifacts {
        println!("wrote {}", a.display());
    }
    println!("{} finished in {:.2}s", r.id, r.seconds);
    Ok(r.passed())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn sieve(cli: &Cli, limit: u64, csv: bool) -> Result<bool> {
    let t = load_primes(limit)?;
    let theta: f64 = t.logs().iter().sum();
    println!("π({limit}) = {}, ϑ({limit}) = {theta:.6}, ϑ/x = {:.6}", t.len(), theta / limit as f64);
    if csv {
        let path = cli.out.join("primes.csv");
        let mut w = create(&path)?;
        writeln!(w, "p")?;
        for p in t.primes() {
            writeln!(w, "{p}")?;
        }
        w.flush()?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn parse_poly(k: usize, s: &str) -> Result<PolynomialMap> {
    let mut comps = Vec::new();
    for comp in s.split(';') {
        let mut terms = Vec::new();
        for term in comp.split('+') {
            let (c, e) = term
                .trim()
                .split_once(':')
                .with_context(|| format!("term {term:?} is not coef:exponents"))?;
            let exps = e.split(',').map(|x| x.trim().parse::<u32>()).collect::<Result<Vec<_>, _>>()?;
            terms.push((exps, c.trim().parse::<i64>()?));
        }
        comps.push(terms);
    }
    Ok(PolynomialMap::new(k, comps)?)
}

fn lift_of(orbit: &OrbitArgs, poly: Option<&str>) -> Result<Lift> {
    let d = orbit.desc();
    match poly {
        Some(s) => Ok(lift_polynomial(&parse_poly(d.kprime + d.kdoubleprime, s)?)?),
        None => d.lift(),
    }
}

fn orbit_cmd(cli: &Cli, args: &OrbitArgs, n: u64, format: &str) -> Result<bool> {
    let d = args.desc();
    let primes = load_primes(n.max(2))?;
    let gamma = build_gamma(d.kprime + d.kdoubleprime, d.degree)?;
    let orbit = enumerate_orbit(&d.body()?, n, d.shape(), &gamma, &primes, DEFAULT_ORBIT_CAP)?;
    let path = match format {
        "bin" => {
            let p = cli.out.join("orbit.bin");
            let mut w = create(&p)?;
            write_orbit(&mut w, &orbit)?;
            w.flush()?;
            p
        }
        "csv" => {
            let p = cli.out.join("orbit.csv");
            let mut w = create(&p)?;
            write_orbit_csv(&mut w, &orbit)?;
            w.flush()?;
            p
        }
        other => bail!("unknown format {other:?}; expected bin or csv"),
    };
    println!("{} points, ϑ = {:.6}; wrote {}", orbit.len(), orbit.theta(), path.display());
    Ok(true)
}

fn read_function(path: Option<&Path>, d0: usize) -> Result<SparseFunction> {
    let Some(path) = path else {
        return Ok(SparseFunction::delta(vec![0; d0]));
    };
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let f = if path.extension().is_some_and(|e| e == "csv") { read_sparse_csv(r)? } else { read_sparse(&mut r)? };
    if f.d0() != d0 {
        bail!("{} has {} coordinates, the map has {d0}", path.display(), f.d0());
    }
    Ok(f)
}

fn apply(cli: &Cli, op: &OperatorArgs, weighted: Option<bool>) -> Result<bool> {
    let mut d = op.orbit.desc();
    d.signed |= weighted.is_none();
    let lift = lift_of(&op.orbit, op.poly.as_deref())?;
    let primes = load_primes(op.n.max(2))?;
    let orbit = enumerate_orbit(&d.body()?, op.n, d.shape(), &lift.gamma, &primes, DEFAULT_ORBIT_CAP)?;
    let f = read_function(op.input.as_deref(), lift.d0())?;
    let (g, name) = match weighted {
        Some(w) => (apply_average(&f, &orbit, &lift, w)?, "average.csv"),
        None => (apply_singular(&f, &CZKernel::builtin(d.kprime + d.kdoubleprime), &orbit, &lift)?, "singular.csv"),
    };
    let path = cli.out.join(name);
    let mut w = create(&path)?;
    write_sparse_csv(&mut w, &g)?;
    w.flush()?;
    println!("{} nonzero values, ‖·‖_1 = {:.6e}; wrote {}", g.len(), g.norm(1.0), path.display());
    Ok(true)
}

fn variation(input: &Path, r: f64, rho: f64, mode: &str) -> Result<bool> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (idx, vals) = read_sequence_csv(BufReader::new(file))?;
    let seq = IndexedSequence::new(idx, vals)?;
    let out = match mode {
        "dp" => serde_json::json!({ "vr": vr_seq(&seq, r)? }),
        "bruteforce" => serde_json::json!({ "vr": vr_bruteforce(seq.values(), r)? }),
        "dyadic" => {
            let (lhs, rhs) = vr_dyadic_bound(seq.values(), r)?;
            serde_json::json!({ "lhs": lhs, "rhs": rhs })
        }
        "split" => serde_json::to_value(split_variation(&seq, rho, r)?)?,
        "oscillation" => {
            let (lo, hi) = (seq.indices()[0], seq.indices()[seq.len() - 1]);
            let lac: Vec<i64> = (0..63)
                .map(|j| 1i64 << j)
                .filter(|&i| i >= lo && i <= hi && seq.position(i).is_some())
                .collect();
            if lac.len() < 2 {
                bail!("oscillation needs at least two power-of-two indices in the sequence");
            }
            serde_json::json!({ "lacunary": lac, "oscillation": oscillation(&seq, &lac)? })
        }
        other => bail!("unknown mode {other:?}; expected dp, bruteforce, dyadic, split or oscillation"),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn xi_eval(orbit: &OrbitArgs, xi: &[f64], n: u64, beta: u32, chi: f64, rho: f64, level: Option<u64>) -> Result<bool> {
    let d = orbit.desc();
    let params = IWParams::new(beta, chi, rho, &build_gamma(d.kprime + d.kdoubleprime, d.degree)?)?;
    if xi.len() != params.d() {
        bail!("ξ has {} coordinates, expected {}", xi.len(), params.d());
    }
    let big_q = (n as f64).powi(beta as i32).clamp(1.0, 1e15) as u64;
    let approx = xi
        .iter()
        .map(|&x| dirichlet_approx(x, big_q).map(|a| serde_json::json!({ "a": a.a, "q": a.q, "err": a.err })))
        .collect::<rvl_core::Result<Vec<_>>>()?;
    let out = serde_json::json!({
        "eta_n": eta_n(xi, n, &params),
        "xi_partition": xi_partition(xi, n, level, &params, DEFAULT_SET_CAP)?,
        "level": params.level(n),
        "approximations": approx,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn acceptance(cli: &Cli, name: &str, refit: bool, json: Option<&Path>, list: bool) -> Result<bool> {
    if list {
        for n in Suite::names() {
            println!("{n}");
        }
        return Ok(true);
    }
    let mut opts = Options::default();
    if let Some(s) = cli.seed {
        opts.seed = s;
    }
    opts.tolerance = cli.tolerance;
    opts.refit = refit;
    let suite = Suite::new(opts.clone())?;
    let filter = (name != "all").then_some(name);
    let mut records = Vec::new();
    for n in Suite::names().filter(|n| filter.is_none_or(|f| f == *n)) {
        let rec = suite.run(n)?;
        println!("{}", rec.summary());
        if refit && !rec.fitted.is_empty() {
            println!("     fitted {:?}", rec.fitted);
        }
        records.push(rec);
    }
    if records.is_empty() {
        bail!("unknown check {name:?}; `rvl acceptance --list` shows the names");
    }
    let verdict = Verdict::new(&opts, records);
    let path = json.map(Path::to_path_buf).unwrap_or_else(|| cli.out.join("acceptance.json"));
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &verdict)?;
    w.flush()?;
    let failed = verdict.checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed; verdict in {}", verdict.checks.len() - failed, verdict.checks.len(), path.display());
    Ok(verdict.passed)
}
