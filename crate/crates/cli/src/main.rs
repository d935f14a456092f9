//! `sisnet`: simulate, map regimes, run the receding-horizon controller, or
//! regenerate one of the named numerical studies.
//!
//! Exit status is 0 on success, 2 for configuration errors and 3 when a
//! computation fails.

mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sisnet::equilibria::{hopf_curve, region_map, transcritical_u1, RegionClass};
use sisnet::experiments::{hopf_u1_grid, scenario_run, RegionGrid, HOPF_U2_RANGE};
use sisnet::integrator::{simulate, ControlSchedule, Trajectory};
use sisnet::io;
use sisnet::{run_nmpc, Dynamics, Error, NmpcConfig, Overrides, Result, System, SystemParams};

#[derive(Parser, Debug)]
#[command(name = "sisnet", version, about = "Epidemic control on adaptive networks by link rewiring")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for the controller's random restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also render SVG plots.
    #[arg(long, global = true)]
    plot: bool,
    /// Use the SS recovery term exactly as printed (coefficient 1 instead of 2).
    #[arg(long, global = true)]
    literal_paper_ss: bool,
    /// Which predicted outputs enter the controller's cost.
    #[arg(long, global = true, value_enum)]
    cost_indexing: Option<Indexing>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Indexing {
    Shifted,
    Literal,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate under a constant control or a schedule file.
    Simulate,
    /// Classify a (u1, u2) grid and trace the transcritical and Hopf boundaries.
    Regions,
    /// Run the receding-horizon controller.
    Nmpc,
    /// Run a named study (regionmap, resurgence, fig3, fig4, fig5-left, fig5-right, fig6, stepsize, damping, table2).
    Experiment { name: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sisnet: {e}");
            ExitCode::from(if e.is_configuration() { 2 } else { 3 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let overrides = load_overrides(cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(cli, &overrides),
        Command::Regions => cmd_regions(cli, &overrides),
        Command::Nmpc => cmd_nmpc(cli, &overrides),
        Command::Experiment { name } => cmd_experiment(cli, &overrides, name),
    }
}

/// The config file, with command-line flags layered on top.
fn load_overrides(cli: &Cli) -> Result<Overrides> {
    let mut o = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Overrides::parse(&text)?
        }
        None => Overrides::default(),
    };
    if let Some(seed) = cli.seed {
        o.set("control.seed", &seed.to_string())?;
    }
    if cli.literal_paper_ss {
        o.set("control.ss_recovery", "literal")?;
    }
    if let Some(ix) = cli.cost_indexing {
        o.set("control.cost_indexing", if matches!(ix, Indexing::Literal) { "literal" } else { "shifted" })?;
    }
    Ok(o)
}

fn effective(o: &Overrides) -> Result<(SystemParams, NmpcConfig)> {
    let mut params = SystemParams::default();
    let mut cfg = NmpcConfig::default();
    o.apply_system(&mut params)?;
    o.apply_control(&mut cfg)?;
    Ok((params, cfg))
}

fn write_trajectory(out: &Path, traj: &Trajectory, params: &SystemParams) -> Result<()> {
    io::create_in(out, "trajectory.csv", |f| io::write_trajectory(f, traj, params))
}

fn plot_trajectory(out: &Path, name: &str, title: &str, traj: &Trajectory) -> Result<()> {
    let series = |f: fn(&(f64, f64)) -> f64| traj.times.iter().copied().zip(traj.outputs.iter().map(f)).collect();
    let svg = svg::line_panels(title, &[("I(t)", series(|y| y.0)), ("n(t)", series(|y| y.1))]);
    fs::write(out.join(name), svg)?;
    Ok(())
}

fn cmd_simulate(cli: &Cli, o: &Overrides) -> Result<()> {
    let (params, cfg) = effective(o)?;
    let schedule = match o.word("control.schedule") {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::Config {
                key: "control.schedule".into(),
                reason: format!("{path}: {e}"),
            })?;
            ControlSchedule::new(cfg.dt, io::read_schedule(file)?)?
        }
        None => ControlSchedule::constant(cfg.dt, cfg.steps(), o.constant_control()?)?,
    };
    let traj = simulate(&Dynamics::new(params, System::Constant), &schedule, &cfg.step)?;
    write_trajectory(&cli.out, &traj, &params)?;
    let (i, n) = traj.final_output().expect("non-empty trajectory");
    io::write_json(
        &cli.out.join("summary.json"),
        &json!({
            "command": "simulate",
            "params": params,
            "dt": schedule.dt,
            "T": schedule.horizon(),
            "step": cfg.step,
            "schedule": schedule.steps,
            "final_I": i,
            "final_n": n,
        }),
    )?;
    if cli.plot {
        plot_trajectory(&cli.out, "trajectory.svg", "constant control", &traj)?;
    }
    Ok(())
}

fn cmd_regions(cli: &Cli, o: &Overrides) -> Result<()> {
    let (params, _) = effective(o)?;
    let grid = RegionGrid::default().with_overrides(o)?;
    let cells = region_map(&params, &grid.u1_values(), &grid.u2_values())?;
    io::create_in(&cli.out, "regions.csv", |f| io::write_regions(f, &cells))?;
    let threshold = transcritical_u1(&params);
    let hopf = hopf_curve(&params, &hopf_u1_grid(&params), HOPF_U2_RANGE)?;
    let rows: Vec<Vec<io::Cell>> = hopf.iter().map(|&(a, b)| vec![a.into(), b.into()]).collect();
    io::create_in(&cli.out, "hopf.csv", |f| io::write_table(f, &["u1", "u2"], &rows))?;
    let count = |c: RegionClass| cells.iter().filter(|x| x.class == c).count();
    io::write_json(
        &cli.out.join("summary.json"),
        &json!({
            "command": "regions",
            "params": params,
            "grid": grid,
            "transcritical_u1": threshold,
            "hopf_points": hopf.len(),
            "counts": {
                "endemic_stable": count(RegionClass::EndemicStable),
                "oscillatory": count(RegionClass::Oscillatory),
                "disease_free_stable": count(RegionClass::DiseaseFreeStable),
            },
        }),
    )?;
    if cli.plot {
        fs::write(cli.out.join("regions.svg"), svg::region_map(&cells))?;
    }
    Ok(())
}

fn cmd_nmpc(cli: &Cli, o: &Overrides) -> Result<()> {
    for key in ["control.M1", "control.M2"] {
        if o.get(key).is_none() {
            return Err(Error::Config {
                key: key.into(),
                reason: "required for `nmpc`".into(),
            });
        }
    }
    let (params, cfg) = effective(o)?;
    let r = run_nmpc(&params, &cfg)?;
    write_trajectory(&cli.out, &r.trajectory, &params)?;
    let rows: Vec<Vec<io::Cell>> = r
        .trajectory
        .times
        .iter()
        .zip(&r.applied_controls.steps)
        .map(|(&t, u)| vec![t.into(), u.u1.into(), u.u2.into()])
        .collect();
    io::create_in(&cli.out, "controls.csv", |f| io::write_table(f, &["t", "u1", "u2"], &rows))?;
    io::write_json(
        &cli.out.join("summary.json"),
        &json!({
            "command": "nmpc",
            "params": params,
            "config": cfg,
            "final_I": r.final_i,
            "final_n": r.final_n,
            "dev_I": r.dev_i,
            "dev_n": r.dev_n,
            "controllable": r.controllable,
            "stalled_steps": r.stalled_steps,
        }),
    )?;
    if cli.plot {
        plot_trajectory(&cli.out, "trajectory.svg", "receding-horizon control", &r.trajectory)?;
    }
    Ok(())
}

fn cmd_experiment(cli: &Cli, o: &Overrides, name: &str) -> Result<()> {
    let summary = scenario_run(name, o, &cli.out)?;
    if cli.plot {
        let files = summary["files"].as_array().cloned().unwrap_or_default();
        for file in files.iter().filter_map(|f| f.as_str()) {
            if file == "regions.csv" {
                let cells = io::read_regions(fs::File::open(cli.out.join(file))?)?;
                fs::write(cli.out.join("regions.svg"), svg::region_map(&cells))?;
            } else if file.starts_with("trajectory") {
                let rows = io::read_trajectory(fs::File::open(cli.out.join(file))?)?;
                let series = |c: usize| rows.iter().map(|r| (r[0], r[c])).collect();
                let svg = svg::line_panels(file, &[("I(t)", series(1)), ("n(t)", series(5))]);
                fs::write(cli.out.join(file.replace(".csv", ".svg")), svg)?;
            }
        }
    }
    Ok(())
}
