use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nah_bandit::clustering::{self, DistanceMode, DEFAULT_MAX_ITERS};
use nah_bandit::datasets::{self, fixture};
use nah_bandit::ewc::{self, WarmStartConfig};
use nah_bandit::format;
use nah_bandit::harness::bounds::{self, CompareParams, DEFAULT_EPSILON};
use nah_bandit::harness::config::{parse_config, ExperimentConfig, KChoice, Scenario};
use nah_bandit::harness::{experiment, output, probe};
use nah_bandit::noncompliance;
use nah_bandit::simgen;
use nah_bandit::{UserContext, UserId};

#[derive(Parser)]
#[command(name = "nahbandit", version, about = "Recommendation under user non-compliance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// travel or restaurant
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Anchoring scale of the travel population
    #[arg(long, global = true)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic travel population
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Parse restaurant catalog and session logs; without files the bundled fixture is used
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        sessions: Vec<PathBuf>,
    },
    /// Fit per-user preference vectors
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset JSON
        #[arg(long)]
        data: PathBuf,
        /// Ignore the recommendation indicator while fitting
        #[arg(long)]
        without_recommendation: bool,
    },
    /// Cluster fitted preference vectors and train the context warm start
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Output of `fit`
        #[arg(long)]
        thetas: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "loss_guided")]
        mode: String,
    },
    /// Run the online experiment cells and write regret curves
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the regret bounds and the centroid-loss estimate
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 298)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        a: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        l_centroids: f64,
        #[arg(long, default_value_t = 4.0)]
        c: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Largest T of the comparison grid
        #[arg(long, default_value_t = 2000)]
        t_max: usize,
        /// Lipschitz constant; estimated from a generated population when absent
        #[arg(long)]
        lipschitz: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Mixture as comma-separated weight:trace pairs
        #[arg(long, default_value = "1:0.02")]
        mixture: String,
    },
    /// Monte Carlo probe of two-option parameter recovery
    ProbeSampleComplexity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [20usize, 200, 2000])]
        t_grid: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Label sharpness
        #[arg(long, default_value_t = probe::DEFAULT_BETA)]
        sharpness: f64,
    },
}

impl Common {
    fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        self.experiment_or(Scenario::Travel)
    }

    /// Config file (if any, else `default`'s settings) with scenario, seed,
    /// beta and out overrides.
    fn experiment_or(&self, default: Scenario) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(nah_bandit::Error::from)
                    .with_context(|| format!("reading {}", p.display()))?;
                parse_config(&text)?
            }
            None => ExperimentConfig::for_scenario(default),
        };
        if let Some(s) = &self.scenario {
            let s: Scenario = s.parse()?;
            if s != cfg.scenario {
                let from_file = self.config.is_some();
                cfg = ExperimentConfig {
                    out: cfg.out.clone(),
                    ..ExperimentConfig::for_scenario(s)
                };
                if from_file {
                    log::warn!("--scenario {s} replaces the configuration file's scenario and its settings");
                }
            }
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(b) = self.beta {
            cfg.betas = vec![b];
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn generate(common: &Common) -> Result<()> {
    let cfg = common.experiment()?;
    let beta = common.beta.unwrap_or(cfg.betas[0]);
    let seed = common.seed();
    let out = common.out();
    output::prepare_out_dir(&out)?;
    let pop = simgen::generate(&experiment::gen_config(&cfg, beta), seed)?;
    let truth: BTreeMap<UserId, Vec<f64>> = pop.truth().into_iter().map(|(id, t)| (id, t.weights)).collect();
    write(&out, "train.json", &format::dataset_to_json(&pop.train_dataset()?)?)?;
    write(&out, "test.json", &format::dataset_to_json(&pop.test_dataset()?)?)?;
    write(&out, "truth.json", &json(&truth)?)?;
    write(&out, "provenance.json", &json(&pop.provenance())?)?;
    Ok(())
}

fn ingest(common: &Common, catalog: &Option<PathBuf>, sessions: &[PathBuf]) -> Result<()> {
    let cfg = common.experiment_or(Scenario::Restaurant)?;
    let out = common.out();
    output::prepare_out_dir(&out)?;
    let ingested = match catalog {
        Some(c) => {
            if sessions.is_empty() {
                bail!(nah_bandit::Error::Config("--catalog needs at least one --sessions file".into()));
            }
            let refs: Vec<&Path> = sessions.iter().map(PathBuf::as_path).collect();
            datasets::ingest_files(c, &refs)?
        }
        None => {
            let (c, s) = fixture::write(
                &out.join("fixture"),
                &fixture::FixtureConfig::default(),
                experiment::FIXTURE_SEED,
            )?;
            let refs: Vec<&Path> = s.iter().map(PathBuf::as_path).collect();
            datasets::ingest_files(&c, &refs)?
        }
    };
    let (train, test) = datasets::split_users(&ingested.dataset, cfg.n_train, cfg.n_test, common.seed())?;
    write(&out, "dataset.json", &format::dataset_to_json(&ingested.dataset)?)?;
    write(&out, "train.json", &format::dataset_to_json(&train)?)?;
    write(&out, "test.json", &format::dataset_to_json(&test)?)?;
    write(&out, "rejects.log", &ingested.rejects_log())?;
    write(&out, "rounds.json", &json(&ingested.rounds)?)?;
    write(&out, "origins.json", &json(&ingested.origins)?)?;
    Ok(())
}

fn fit(common: &Common, data: &Path, without_rec: bool) -> Result<()> {
    let mut cfg = common.experiment()?.fit;
    cfg.use_recommendation = !without_rec;
    let out = common.out();
    output::prepare_out_dir(&out)?;
    let dataset = format::read_dataset(data)?;
    let result = noncompliance::fit_population(&dataset, &cfg, common.seed())?;
    write(&out, "fit.json", &(noncompliance::fit_result_to_json(&result)? + "\n"))
}

fn cluster(common: &Common, data: &Path, thetas: &Path, k: Option<usize>, mode: &str) -> Result<()> {
    let cfg = common.experiment()?;
    let out = common.out();
    output::prepare_out_dir(&out)?;
    let dataset = format::read_dataset(data)?;
    let thetas = noncompliance::thetas_from_json(&fs::read_to_string(thetas).map_err(nah_bandit::Error::from)?)?;
    let mode: DistanceMode = mode.parse()?;
    let seed = common.seed();
    let k = match (k, &cfg.k) {
        (Some(k), _) => k,
        (None, KChoice::Fixed(k)) => *k,
        (None, KChoice::Auto(c)) => clustering::select_k(&thetas, &dataset, c, seed, cfg.eta)?.k,
    };
    let model = clustering::fit(&thetas, &dataset, k, seed, mode, DEFAULT_MAX_ITERS)?;
    let contexts: BTreeMap<UserId, UserContext> =
        dataset.users.iter().map(|u| (u.user_id, u.context.clone())).collect();
    let warm = ewc::warm_start_fit(&contexts, &model.labels, k, &WarmStartConfig::default())?;
    write(&out, "clusters.json", &(model.to_json()? + "\n"))?;
    write(&out, "warm_start.json", &json(&warm)?)?;
    Ok(())
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.experiment()?;
    let out = cfg.out.clone().unwrap_or_else(|| common.out());
    output::prepare_out_dir(&out)?;
    let result = experiment::run_experiment(&cfg)?;
    output::emit_outputs(&result, &cfg, &out)?;
    Ok(())
}

fn parse_mixture(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(|pair| {
            let (w, tr) = pair
                .split_once(':')
                .with_context(|| format!("mixture entry '{pair}' is not weight:trace"))?;
            Ok((w.trim().parse()?, tr.trim().parse()?))
        })
        .collect()
}

const LOG_NOTE: &str = "# natural logarithms; with base-2 logs the sqrt(ln K) term scales by 1/sqrt(ln 2)";

#[allow(clippy::too_many_arguments)]
fn run_bounds(
    common: &Common,
    p: CompareParams,
    t_max: usize,
    lipschitz: Option<f64>,
    epsilon: f64,
    sigma2: f64,
    mixture: &str,
) -> Result<()> {
    let out = common.out();
    output::prepare_out_dir(&out)?;
    let grid: Vec<usize> = (1..=t_max).collect();
    let cmp = bounds::bound_compare(&p, &grid)?;
    let (lipschitz, estimated) = match lipschitz {
        Some(l) => (l, false),
        None => {
            let cfg = common.experiment()?;
            let beta = common.beta.unwrap_or(cfg.betas[0]);
            let pop = simgen::generate(&experiment::gen_config(&cfg, beta), common.seed())?;
            let thetas: Vec<_> = pop.truth().into_values().collect();
            let mut rng = nah_bandit::seed::rng(common.seed(), "lipschitz-probe", 0);
            let probes = simgen::gen_rounds(&pop.config, 200, &mut rng);
            (bounds::estimate_lipschitz(&thetas, &probes, 2000, common.seed())?, true)
        }
    };
    let mixture = parse_mixture(mixture)?;
    let l_gmm = bounds::gmm_l_centroids(lipschitz, epsilon, sigma2, p.n, &mixture)?;

    let mut csv = String::from("T,ewc_bound,linucb_bound,winner\n");
    for r in &cmp.rows {
        let winner = if r.ewc_wins { "ewc" } else { "linucb" };
        let _ = writeln!(csv, "{},{},{},{winner}", r.t, r.ewc, r.linucb);
    }
    csv.push_str(LOG_NOTE);
    csv.push('\n');
    write(&out, "bounds.csv", &csv)?;
    let report = serde_json::json!({
        "N": p.n, "K": p.k, "A": p.a, "d": p.d, "C": p.c, "delta": p.delta,
        "l_centroids": p.l_centroids,
        "threshold": cmp.threshold,
        "crossover": cmp.crossover,
        "threshold_holds": cmp.threshold_holds,
        "gmm": {
            "lipschitz": lipschitz,
            "lipschitz_estimated": estimated,
            "epsilon": epsilon,
            "sigma2": sigma2,
            "mixture": mixture,
            "l_centroids": l_gmm,
            "ewc_bound_at_t_max": bounds::bound_ewc(p.n, t_max, p.k, l_gmm)?,
        },
        "log_base": "natural",
        "log_note": LOG_NOTE.trim_start_matches("# "),
    });
    write(&out, "bounds.json", &json(&report)?)
}

fn run_probe(common: &Common, d: usize, grid: &[usize], trials: usize, sharpness: f64) -> Result<()> {
    let out = common.out();
    output::prepare_out_dir(&out)?;
    let rows = probe::sample_complexity_probe(d, grid, trials, sharpness, common.seed())?;
    let mut csv = String::from("T,mean_error,stderr,trials\n");
    for r in rows {
        let _ = writeln!(csv, "{},{},{},{}", r.t, r.mean_error, r.stderr, r.trials);
    }
    write(&out, "probe.csv", &csv)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => generate(&common),
        Command::Ingest {
            common,
            catalog,
            sessions,
        } => ingest(&common, &catalog, &sessions),
        Command::Fit {
            common,
            data,
            without_recommendation,
        } => fit(&common, &data, without_recommendation),
        Command::Cluster {
            common,
            data,
            thetas,
            k,
            mode,
        } => cluster(&common, &data, &thetas, k, &mode),
        Command::Run { common } => run(&common),
        Command::Bounds {
            common,
            n,
            k,
            a,
            d,
            l_centroids,
            c,
            delta,
            t_max,
            lipschitz,
            epsilon,
            sigma2,
            mixture,
        } => run_bounds(
            &common,
            CompareParams {
                n,
                k,
                a,
                d,
                l_centroids,
                c,
                delta,
            },
            t_max,
            lipschitz,
            epsilon,
            sigma2,
            &mixture,
        ),
        Command::ProbeSampleComplexity {
            common,
            d,
            t_grid,
            trials,
            sharpness,
        } => run_probe(&common, d, &t_grid, trials, sharpness),
    }
}

fn report(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            return report("usage", e.to_string());
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .downcast_ref::<nah_bandit::Error>()
                .map(|e| e.kind())
                .unwrap_or("other");
            report(kind, format!("{e:#}"))
        }
    }
}
