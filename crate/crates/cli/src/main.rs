//! Command-line front end.
//!
//! Subcommands:
//!   simulate --config <path> --out-dir <dir>
//!   track    --config <path> --cubes <file> --out <csv>
//!   eval     --tracks <csv> --truth <csv> --out <csv> [--config <path>]
//!   all      --config <path> --out-dir <dir>
//!
//! Common flags: --seed <u64> overrides the config seed, --frames <n>
//! truncates the run, --threads <n> caps worker parallelism (as does the
//! TBD_GLMB_THREADS environment variable).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use tbd_glmb::pipeline;
use tbd_glmb::RunConfig;

const USAGE: &str = "\
tbd-glmb — track-before-detect multi-target tracker on radar cubes

USAGE:
    tbd-glmb simulate --config <path> --out-dir <dir> [--seed <u64>] [--frames <n>] [--threads <n>]
    tbd-glmb track    --config <path> --cubes <file> --out <csv> [--seed <u64>] [--frames <n>] [--threads <n>]
    tbd-glmb eval     --tracks <csv> --truth <csv> --out <csv> [--config <path>]
    tbd-glmb all      --config <path> --out-dir <dir> [--seed <u64>] [--frames <n>] [--threads <n>]
    tbd-glmb print-config

`print-config` writes the default configuration (the canned two-vehicle
scenario) to stdout as a starting point.
";

struct Flags {
    values: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String]) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let Some(name) = arg.strip_prefix("--") else {
                return Err(format!("unexpected argument `{arg}`"));
            };
            let value = args
                .get(i + 1)
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            values.insert(name.to_string(), value.clone());
            i += 2;
        }
        Ok(Self { values })
    }

    fn take(&mut self, name: &str) -> Option<String> {
        self.values.remove(name)
    }

    fn finish(self) -> Result<(), String> {
        if let Some(name) = self.values.keys().next() {
            return Err(format!("unknown flag --{name}"));
        }
        Ok(())
    }
}

fn required(flag: Option<String>, name: &str) -> Result<PathBuf, String> {
    flag.map(PathBuf::from)
        .ok_or_else(|| format!("missing required flag --{name}"))
}

fn load_config(
    path: Option<String>,
    seed: Option<String>,
    frames: Option<String>,
) -> Result<(RunConfig, Option<usize>), String> {
    let mut config = match path {
        Some(p) => RunConfig::parse_file(PathBuf::from(&p).as_path())
            .map_err(|e| format!("config {p}: {e}"))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed.parse().map_err(|_| "--seed must be a u64".to_string())?;
    }
    let frames = match frames {
        Some(f) => {
            let n: usize = f.parse().map_err(|_| "--frames must be an integer".to_string())?;
            config.n_frames = config.n_frames.min(n);
            Some(n)
        }
        None => None,
    };
    Ok((config, frames))
}

fn parse_threads(flag: Option<String>) -> Result<Option<usize>, String> {
    match flag {
        Some(t) => t
            .parse()
            .map(Some)
            .map_err(|_| "--threads must be an integer".to_string()),
        None => Ok(None),
    }
}

fn run() -> Result<(), String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return Err("no subcommand".into());
    };
    let mut flags = Flags::parse(&args[1..])?;

    match command.as_str() {
        "simulate" => {
            let config_path = flags.take("config");
            let out_dir = required(flags.take("out-dir"), "out-dir")?;
            let seed = flags.take("seed");
            let frames = flags.take("frames");
            let threads = parse_threads(flags.take("threads"))?;
            flags.finish()?;
            let (config, _) = load_config(config_path, seed, frames)?;
            let out = pipeline::simulate(&config, &out_dir, threads).map_err(|e| e.to_string())?;
            println!(
                "simulated {} frames -> {} / {}",
                out.n_frames,
                out.cubes_path.display(),
                out.truth_path.display()
            );
        }
        "track" => {
            let config_path = flags.take("config");
            let cubes = required(flags.take("cubes"), "cubes")?;
            let out = required(flags.take("out"), "out")?;
            let seed = flags.take("seed");
            let frames = flags.take("frames");
            let threads = parse_threads(flags.take("threads"))?;
            flags.finish()?;
            let (config, max_frames) = load_config(config_path, seed, frames)?;
            let result = pipeline::track(&config, &cubes, &out, max_frames, threads)
                .map_err(|e| e.to_string())?;
            println!(
                "tracked {} records -> {} (summary {})",
                result.records.len(),
                out.display(),
                result.summary_path.display()
            );
        }
        "eval" => {
            let tracks = required(flags.take("tracks"), "tracks")?;
            let truth = required(flags.take("truth"), "truth")?;
            let out = required(flags.take("out"), "out")?;
            let config_path = flags.take("config");
            flags.finish()?;
            let (config, _) = load_config(config_path, None, None)?;
            let result = pipeline::evaluate(
                &tracks,
                &truth,
                &out,
                config.ospa_cutoff,
                config.ospa_order,
                config.association_gate,
            )
            .map_err(|e| e.to_string())?;
            println!(
                "evaluated {} frames -> {} (mean OSPA {:.3} m, label consistency {:.3})",
                result.n_frames,
                out.display(),
                result.mean_ospa,
                result.label_consistency
            );
        }
        "all" => {
            let config_path = flags.take("config");
            let out_dir = required(flags.take("out-dir"), "out-dir")?;
            let seed = flags.take("seed");
            let frames = flags.take("frames");
            let threads = parse_threads(flags.take("threads"))?;
            flags.finish()?;
            let (config, _) = load_config(config_path, seed, frames)?;
            let result = pipeline::run_all(&config, &out_dir, threads).map_err(|e| e.to_string())?;
            println!(
                "pipeline done -> {} (mean OSPA {:.3} m, label consistency {:.3})",
                out_dir.display(),
                result.mean_ospa,
                result.label_consistency
            );
        }
        "print-config" => {
            flags.finish()?;
            print!("{}", RunConfig::default().serialize());
        }
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
        }
        other => {
            eprint!("{USAGE}");
            return Err(format!("unknown subcommand `{other}`"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
