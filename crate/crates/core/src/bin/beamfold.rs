use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use beamfold::report::{
    cmd_bound, cmd_endpoint, cmd_trace, cmd_verify, BoundArgs, EndpointArgs, TraceArgs, VerifyArgs, EXIT_USAGE,
};
use beamfold::{Mode, Params};

/// Traces and checks solution curves of u'''' = lambda f(u) on a clamped beam.
#[derive(Parser, Debug)]
#[command(name = "beamfold", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace the solution curve and write curve.csv, solutions.bin, manifest.json and plot.gp.
    Trace(TraceCmd),
    /// Recompute every check from the stored nodal data of a previous trace.
    Verify(VerifyCmd),
    /// Compare the upper branch with the limiting profile w near p = r.
    Endpoint(EndpointCmd),
    /// Print the upper bound r^2 mu1 / (4a) on the fold value.
    Bound(BoundCmd),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Catalog entry, e.g. inverse_square, cnt_actuator, exponential.
    #[arg(long)]
    model: String,
    /// Model parameters as key=value; may be repeated or given as a list.
    #[arg(long = "param", num_args = 1.., value_parser = parse_kv)]
    params: Vec<(String, f64)>,
}

impl ModelArgs {
    fn params(&self) -> Result<Params, String> {
        let mut m = Params::new();
        for (k, v) in &self.params {
            if m.insert(k.clone(), *v).is_some() {
                return Err(format!("parameter `{k}` given twice"));
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Max,
    Arclength,
}

#[derive(Args, Debug)]
struct TraceCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Grid nodes (odd, at least 11).
    #[arg(long, default_value_t = 501)]
    n: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Max)]
    mode: ModeArg,
    /// Output directory; relative paths resolve against BEAMFOLD_SEED_DIR when set.
    #[arg(long)]
    out: PathBuf,
    /// Trace loads that fail the structural hypotheses (arclength mode only).
    #[arg(long)]
    exploratory: bool,
}

#[derive(Args, Debug)]
struct VerifyCmd {
    /// Trace output directory or its curve.csv.
    #[arg(long)]
    curve: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct EndpointCmd {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 501)]
    n: usize,
}

#[derive(Args, Debug)]
struct BoundCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Trace output directory; prints the margin against its fold value.
    #[arg(long)]
    curve: Option<PathBuf>,
}

fn parse_kv(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn run(cli: Cli) -> Result<i32, String> {
    let mut out = std::io::stdout().lock();
    let code = match cli.command {
        Command::Trace(c) => cmd_trace(
            &TraceArgs {
                params: c.model.params()?,
                model: c.model.model,
                n: c.n,
                mode: match c.mode {
                    ModeArg::Max => Mode::MaxValue,
                    ModeArg::Arclength => Mode::Arclength,
                },
                out: c.out,
                exploratory: c.exploratory,
            },
            &mut out,
        ),
        Command::Verify(c) => cmd_verify(
            &VerifyArgs {
                curve: c.curve,
                params: c.model.params()?,
                model: c.model.model,
            },
            &mut out,
        ),
        Command::Endpoint(c) => cmd_endpoint(
            &EndpointArgs {
                params: c.model.params()?,
                model: c.model.model,
                n: c.n,
            },
            &mut out,
        ),
        Command::Bound(c) => cmd_bound(
            &BoundArgs {
                params: c.model.params()?,
                model: c.model.model,
                curve: c.curve,
            },
            &mut out,
        ),
    };
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
