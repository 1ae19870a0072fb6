use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use molcom_core::{CountFamily, IsiMode, SystemConfig};
use molcom_harness::{peak_table, preset_table, run_experiment, summarize, Error, ExperimentSpec, Mode, ResultTable, Result};

#[derive(Parser)]
#[command(name = "molcom", version, about = "Analytic curves and particle simulations of an enzyme-assisted diffusive link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Peak statistics, decay intervals or expected impulse responses.
    Analytic {
        #[arg(long, value_enum, default_value_t = Curve::Peaks)]
        curve: Curve,
        /// Decay fractions, e.g. `0.1,0.3,0.5`.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulated impulse response next to both analytic curves.
    Simulate {
        /// Sample times in microseconds, e.g. `5,10,25.5`.
        #[arg(long, value_delimiter = ',')]
        times_us: Option<Vec<f64>>,
        /// Zero every rate and remove the enzymes.
        #[arg(long)]
        diffusion_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Probability of detecting a lone 1-bit.
    Detect {
        #[command(flatten)]
        thresholds: Thresholds,
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Per-bit error probabilities of a known or random sequence.
    Ber {
        /// Bit string such as `1011`; random sequences when omitted.
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long, default_value_t = 10)]
        sequences: usize,
        #[arg(long, default_value_t = 50)]
        n_bits: usize,
        #[arg(long, default_value_t = 120.0)]
        tb_us: f64,
        #[command(flatten)]
        thresholds: Thresholds,
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Expected mean error over random sequences for each threshold and bit interval.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "120")]
        tb_us: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        sequences: usize,
        #[arg(long, default_value_t = 50)]
        n_bits: usize,
        #[command(flatten)]
        thresholds: Thresholds,
        #[command(flatten)]
        common: Common,
    },
    /// Derived constants of the bundled systems.
    Presets {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge shards of one simulated run.
    Summarize {
        #[arg(required = true)]
        tables: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a table from its embedded metadata.
    Rerun {
        table: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    Peaks,
    Decay,
    Impulse,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Binomial,
    Poisson,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Isi {
    None,
    Prev,
    Full,
}

#[derive(Args)]
struct Common {
    /// Preset name or config file path.
    #[arg(long, default_value = "system1")]
    system: String,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    enzymes: Switch,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// First trial index, for running one shard of a larger run.
    #[arg(long, default_value_t = 0)]
    trial_offset: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Isi::Full)]
    isi: Isi,
    #[arg(long, value_enum, default_value_t = Family::Poisson)]
    family: Family,
    #[arg(long)]
    threads: Option<usize>,
    /// Refuse simulations estimated above this many particle-steps.
    #[arg(long, default_value_t = molcom_harness::DEFAULT_BUDGET)]
    budget: f64,
    /// Also write a matplotlib script next to the CSV.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct Thresholds {
    /// Decision thresholds, as a list (`1,2,5`) or a range (`1-10`).
    #[arg(long, default_value = "1-10")]
    thresholds: String,
}

fn parse_thresholds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot read thresholds {s:?}"));
    if let Some((a, b)) = s.split_once('-') {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

impl Common {
    fn spec(&self, mode: Mode) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(mode, &self.system);
        s.enzymes = matches!(self.enzymes, Switch::On);
        s.trials = self.trials;
        s.trial_offset = self.trial_offset;
        s.master_seed = self.seed;
        s.isi = match self.isi {
            Isi::None => IsiMode::None,
            Isi::Prev => IsiMode::PreviousOnly,
            Isi::Full => IsiMode::Full,
        };
        s.family = match self.family {
            Family::Binomial => CountFamily::Binomial,
            Family::Poisson => CountFamily::Poisson,
            Family::Gaussian => CountFamily::Gaussian,
        };
        s.budget = self.budget;
        s
    }
}

fn set_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn emit(table: &ResultTable, out: Option<&Path>, plot: bool) -> Result<()> {
    match out {
        Some(path) => {
            table.write_file(path)?;
            if plot {
                let script = path.with_extension("plot.py");
                std::fs::write(&script, plot_script(path))
                    .map_err(|source| Error::Io { path: script.display().to_string(), source })?;
            }
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match table.write_csv(&mut stdout).and_then(|_| stdout.flush()) {
                // The reader went away, e.g. `| head`.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|source| Error::Io { path: "<stdout>".into(), source }),
            }
        }
    }
}

fn plot_script(csv: &Path) -> String {
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    format!(
        "import csv\nimport matplotlib.pyplot as plt\n\n\
         with open({name:?}) as f:\n    rows = [r for r in csv.reader(f) if r and not r[0].startswith('#')]\n\
         header, data = rows[0], [[float(x) for x in r] for r in rows[1:]]\n\
         x = [r[0] for r in data]\n\
         for i, col in enumerate(header[1:], start=1):\n    \
         if col.endswith(('_n', '_sum', '_sumsq', '_stderr')):\n        continue\n    \
         plt.plot(x, [r[i] for r in data], marker='.', label=col)\n\
         plt.xlabel(header[0])\nplt.legend()\nplt.show()\n"
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analytic { curve, alphas, common } => {
            set_threads(common.threads)?;
            let table = match curve {
                Curve::Peaks => peak_table(&SystemConfig::load(&common.system)?),
                Curve::Decay => {
                    let mut spec = common.spec(Mode::DecayInterval);
                    if let Some(a) = alphas {
                        spec.alphas = a;
                    }
                    run_experiment(&spec)?
                }
                Curve::Impulse => run_experiment(&common.spec(Mode::ImpulseResponse))?,
            };
            emit(&table, common.out.as_deref(), common.plot)
        }
        Command::Simulate { times_us, diffusion_only, common } => {
            set_threads(common.threads)?;
            let mut spec = common.spec(Mode::ImpulseResponse);
            spec.simulate = true;
            spec.diffusion_only = diffusion_only;
            if let Some(t) = times_us {
                spec.times_us = t;
            }
            emit(&run_experiment(&spec)?, common.out.as_deref(), common.plot)
        }
        Command::Detect { thresholds, simulate, common } => {
            set_threads(common.threads)?;
            let mut spec = common.spec(Mode::FirstBitDetection);
            spec.thresholds = parse_thresholds(&thresholds.thresholds)?;
            spec.simulate = simulate;
            emit(&run_experiment(&spec)?, common.out.as_deref(), common.plot)
        }
        Command::Ber { sequence, sequences, n_bits, tb_us, thresholds, simulate, common } => {
            set_threads(common.threads)?;
            let mut spec = common.spec(Mode::KnownSequenceError);
            spec.sequence = sequence;
            spec.sequences = sequences;
            spec.n_bits = n_bits;
            spec.t_b_us = vec![tb_us];
            spec.thresholds = parse_thresholds(&thresholds.thresholds)?;
            spec.simulate = simulate;
            emit(&run_experiment(&spec)?, common.out.as_deref(), common.plot)
        }
        Command::Sweep { tb_us, sequences, n_bits, thresholds, common } => {
            set_threads(common.threads)?;
            let mut spec = common.spec(Mode::ThresholdSweep);
            spec.t_b_us = tb_us;
            spec.sequences = sequences;
            spec.n_bits = n_bits;
            spec.thresholds = parse_thresholds(&thresholds.thresholds)?;
            emit(&run_experiment(&spec)?, common.out.as_deref(), common.plot)
        }
        Command::Presets { out } => emit(&preset_table()?, out.as_deref(), false),
        Command::Summarize { tables, out } => {
            let tables = tables.iter().map(|p| ResultTable::read_file(p)).collect::<Result<Vec<_>>>()?;
            emit(&summarize(&tables)?, out.as_deref(), false)
        }
        Command::Rerun { table, out, threads } => {
            set_threads(threads)?;
            let old = ResultTable::read_file(&table)?;
            let spec = old
                .metadata
                .spec
                .ok_or_else(|| Error::Config("table carries no experiment definition".into()))?;
            let cfg = spec.load_config()?;
            if molcom_harness::config_hash(&cfg) != old.metadata.config_hash {
                return Err(Error::Config(format!("{} no longer matches the recorded config hash", spec.system)));
            }
            emit(&run_experiment(&spec)?, out.as_deref(), false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
