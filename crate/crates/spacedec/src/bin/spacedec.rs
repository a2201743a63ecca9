//! Command-line entry point. All logic lives in the library; this binary
//! only parses arguments and dispatches.

use std::path::PathBuf;
use std::process::ExitCode;

use spacedec::cli;
use spacedec::constraint::ConstraintKind;

const USAGE: &str = "\
spacedec — Riemannian optimization on bounded-rank matrices with invariant constraints

USAGE:
    spacedec run <config.cfg>
    spacedec certify --X <matrix.mtx> --grad <matrix.mtx> --rank <r> --kind <k> [--tol <t>]
    spacedec geomtest [--m M] [--n N] [--r R] [--kind K] [--omega W] [--seed S]
    spacedec sweep <dir> [--workers N]

Constraint kinds: euclidean | oblique | fsphere | stiefel:<k>x<p>
The SPACEDEC_THREADS environment variable caps sweep parallelism.
";

struct Flags {
    values: Vec<(String, String)>,
    positional: Vec<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut values = Vec::new();
    let mut positional = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if let Some(name) = arg.strip_prefix("--") {
            let value = it
                .next()
                .ok_or_else(|| format!("flag --{name} needs a value"))?;
            values.push((name.to_string(), value.clone()));
        } else {
            positional.push(arg.clone());
        }
    }
    Ok(Flags { values, positional })
}

impl Flags {
    fn get(&self, name: &str) -> Option<&str> {
        self.values
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T, String> {
        match self.get(name) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| format!("cannot parse --{name} {v}")),
        }
    }
}

fn dispatch() -> Result<i32, String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return Ok(cli::EXIT_CONFIG);
    };
    let rest = &args[1..];
    match command.as_str() {
        "run" => {
            let flags = parse_flags(rest)?;
            let [config] = flags.positional.as_slice() else {
                return Err("run takes exactly one config path".into());
            };
            Ok(cli::cmd_run(&PathBuf::from(config)))
        }
        "certify" => {
            let flags = parse_flags(rest)?;
            let x = flags.get("X").or_else(|| flags.get("x"));
            let x = x.ok_or("certify needs --X <matrix.mtx>")?.to_string();
            let grad = flags
                .get("grad")
                .ok_or("certify needs --grad <matrix.mtx>")?
                .to_string();
            let rank: usize = flags
                .get("rank")
                .ok_or("certify needs --rank <r>")?
                .parse()
                .map_err(|_| "cannot parse --rank")?;
            let kind = ConstraintKind::parse(flags.get("kind").ok_or("certify needs --kind")?)
                .map_err(|e| e.to_string())?;
            let tol: f64 = flags.parse("tol", 1e-6)?;
            Ok(cli::cmd_certify(
                &PathBuf::from(x),
                &PathBuf::from(grad),
                rank,
                kind,
                tol,
            ))
        }
        "geomtest" => {
            let flags = parse_flags(rest)?;
            if !flags.positional.is_empty() {
                return Err("geomtest takes only flags".into());
            }
            let m = flags.parse("m", 12usize)?;
            let n = flags.parse("n", 14usize)?;
            let r = flags.parse("r", 3usize)?;
            let kind = match flags.get("kind") {
                Some(k) => ConstraintKind::parse(k).map_err(|e| e.to_string())?,
                None => ConstraintKind::Oblique,
            };
            let omega = flags.parse("omega", 1.0f64)?;
            let seed = flags.parse("seed", 0u64)?;
            Ok(cli::cmd_geomtest(m, n, r, kind, omega, seed))
        }
        "sweep" => {
            let flags = parse_flags(rest)?;
            let [dir] = flags.positional.as_slice() else {
                return Err("sweep takes exactly one directory".into());
            };
            let workers = match flags.get("workers") {
                Some(v) => Some(v.parse().map_err(|_| "cannot parse --workers")?),
                None => None,
            };
            Ok(cli::cmd_sweep(&PathBuf::from(dir), workers))
        }
        "--help" | "-h" | "help" => {
            print!("{USAGE}");
            Ok(cli::EXIT_OK)
        }
        other => Err(format!("unknown command {other}\n{USAGE}")),
    }
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(cli::EXIT_CONFIG as u8)
        }
    }
}
