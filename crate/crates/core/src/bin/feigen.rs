use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use feigen_core::approx;
use feigen_core::ball::{Disc, FunctionBall};
use feigen_core::certify::ProblemKind;
use feigen_core::report::{
    covering_csv, emit_plot_covering, grouped_layout, run_pipeline, Figure, PlotInputs, Report, RunConfig, Target,
};
use feigen_core::{Error, RoundingContext};

#[derive(Parser)]
#[command(name = "feigen", version, about = "Validated enclosures of the period-doubling fixed point and its constants")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Approximate fixed point and the leading spectrum of its linearisation
    Approx(RunArgs),
    /// Run the certification pipeline for the selected targets
    Certify(RunArgs),
    /// Print certified digit blocks
    Digits {
        #[command(flatten)]
        run: RunArgs,
        /// read digits from an existing report instead of running the pipeline
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write rectangle coverings for the figures as CSV
    Plot {
        #[command(flatten)]
        run: RunArgs,
        /// figure id (fig1, fig2a..fig2d, fig3a..fig3d, fig4a, fig4b) or "all"
        #[arg(long, default_value = "all")]
        fig: String,
        #[arg(long, default_value_t = 10)]
        subdivisions: usize,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// directory holding certified balls from a previous run
        #[arg(long)]
        balls: Option<PathBuf>,
    },
    /// Run every target and write the JSON report, digit blocks and balls
    Report(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 20)]
    degree: usize,
    /// working precision in decimal digits
    #[arg(long, default_value_t = 30)]
    digits: u32,
    #[arg(long, default_value = "1e-8")]
    rho: String,
    #[arg(long)]
    rho_delta: Option<String>,
    #[arg(long)]
    rho_gamma: Option<String>,
    #[arg(long = "boundary", default_value_t = 64)]
    boundary_rectangles: usize,
    #[arg(long, env = "FEIGEN_WORKERS", default_value_t = 1)]
    workers: usize,
    /// comma-separated subset of fixed_point,delta,gamma
    #[arg(long, default_value = "fixed_point,delta,gamma", value_delimiter = ',')]
    targets: Vec<String>,
    #[arg(long)]
    print_digits: Option<u32>,
    #[arg(long, env = "FEIGEN_SCRATCH")]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        Ok(RunConfig {
            degree: self.degree,
            digits: self.digits,
            rho: self.rho.clone(),
            rho_delta: self.rho_delta.clone(),
            rho_gamma: self.rho_gamma.clone(),
            boundary_rectangles: self.boundary_rectangles,
            workers: self.workers,
            targets: self.targets.iter().map(|t| t.parse()).collect::<Result<_, _>>()?,
            print_digits: self.print_digits,
            output_dir: self.out.clone(),
            checkpoint: self.checkpoint.clone(),
        })
    }
}

fn approx_cmd(run: &RunArgs) -> Result<(), Error> {
    let mut cfg = run.config()?;
    cfg.targets.clear();
    cfg.validate()?;
    let g0 = feigen_core::report::bootstrap(&cfg)?;
    let prec = cfg.prec();
    let disc = Disc::standard(prec);
    println!("a ~ {}", g0[0].to_string_radix(10, Some(20)));
    let spec = approx::spectrum(&approx::dt_matrix(&disc, &g0, prec, true));
    let big: Vec<String> = spec
        .iter()
        .filter(|(re, im)| re.hypot(*im) > 1.0)
        .map(|(re, im)| if *im == 0.0 { format!("{re:.9}") } else { format!("{re:.9}{im:+.9}i") })
        .collect();
    println!("eigenvalues of DT outside the unit disc: {}", big.join(", "));
    for (kind, name) in [(ProblemKind::DeltaEigen, "delta"), (ProblemKind::GammaEigen, "gamma")] {
        let (_, lam) = approx::approx_eigenpair(&disc, kind, &g0, cfg.digits)?;
        println!("{name} ~ {}", lam.to_string_radix(10, Some(20)));
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        let ball = FunctionBall::from_floats(&disc, cfg.degree, RoundingContext::new(prec), &g0);
        let path = dir.join("g0_ball.txt");
        std::fs::write(&path, ball.to_text())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn certify_cmd(run: &RunArgs) -> Result<(), Error> {
    let cfg = run.config()?;
    let out = run_pipeline(&cfg)?;
    if let Some(d) = &out.report.domain_extension {
        println!("domain extension: pass ({} rectangles)", d.boundary_rectangles);
    }
    for target in [Target::FixedPoint, Target::Delta, Target::Gamma] {
        let kind = match target {
            Target::FixedPoint => ProblemKind::FixedPoint,
            Target::Delta => ProblemKind::DeltaEigen,
            Target::Gamma => ProblemKind::GammaEigen,
        };
        if let Some(c) = out.certificate(kind) {
            println!(
                "{}: pass  rho {:.3e}  epsilon {:.3e}  kappa {:.3e}  ({:.2}s)",
                kind.name(),
                c.rho.to_f64(),
                c.epsilon.to_f64(),
                c.kappa.to_f64(),
                c.wall_time_s
            );
        }
    }
    for (name, d) in &out.report.digits {
        println!("{name} = {} ({} digits)", d.text, d.count);
    }
    Ok(())
}

fn digits_cmd(run: &RunArgs, report: &Option<PathBuf>) -> Result<(), Error> {
    let digits = match report {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let r: Report = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            r.digits
        }
        None => run_pipeline(&run.config()?)?.report.digits,
    };
    for (name, d) in &digits {
        println!("{}", grouped_layout(name, d));
    }
    Ok(())
}

fn plot_cmd(run: &RunArgs, fig: &str, subdivisions: usize, depth: usize, balls: &Option<PathBuf>) -> Result<(), Error> {
    let figs: Vec<Figure> = if fig == "all" {
        Figure::ALL.to_vec()
    } else {
        vec![fig.parse()?]
    };
    let mut cfg = run.config()?;
    let inputs = match balls {
        Some(dir) => PlotInputs::load(dir)?,
        None => {
            let dir = cfg.output_dir.take();
            let out = run_pipeline(&cfg)?;
            cfg.output_dir = dir;
            out.plot_inputs()
        }
    };
    for f in figs {
        let n = if f == Figure::Fig1 { cfg.boundary_rectangles } else { subdivisions };
        let rows = emit_plot_covering(f, n, &inputs, depth)?;
        let csv = covering_csv(&rows);
        match &cfg.output_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.csv", f.name()));
                std::fs::write(&path, csv)?;
                println!("wrote {} ({} rectangles)", path.display(), rows.len());
            }
            None => print!("{csv}"),
        }
    }
    Ok(())
}

fn report_cmd(run: &RunArgs) -> Result<(), Error> {
    let mut cfg = run.config()?;
    cfg.targets = vec![Target::FixedPoint, Target::Delta, Target::Gamma];
    let out = run_pipeline(&cfg)?;
    match &cfg.output_dir {
        Some(dir) => println!("wrote report to {}", dir.display()),
        None => println!(
            "{}",
            serde_json::to_string_pretty(&out.report).map_err(|e| Error::Io(e.to_string()))?
        ),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Approx(run) => approx_cmd(run),
        Cmd::Certify(run) => certify_cmd(run),
        Cmd::Digits { run, report } => digits_cmd(run, report),
        Cmd::Plot {
            run,
            fig,
            subdivisions,
            depth,
            balls,
        } => plot_cmd(run, fig, *subdivisions, *depth, balls),
        Cmd::Report(run) => report_cmd(run),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
