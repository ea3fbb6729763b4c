//! Command-line front end: data generation, evolution runs, ray
//! re-extraction, post-hoc analysis, and profile tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsw::acoustic::{estimate_blowup_time, RayBundle};
use rsw::burgers::{Burgers1dOracle, BurgersProfile};
use rsw::diag::rate_fit;
use rsw::io::{self, RunConfig};
use rsw::run::{self, RunStatus};
use rsw::state::SampledFields;
use rsw::{Result, RswError};

#[derive(Parser)]
#[command(name = "rsw", version, about = "Rotating shallow water shock laboratory")]
struct Cli {
    /// Worker threads for field sweeps (results are identical for any value).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Seed for any stochastic subsampling in diagnostics.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Resolve a config and write the initial snapshot plus a generation report.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's output dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve a config to completion; writes series.csv, snapshots, manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Optional initial snapshot overriding the config's data section.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-extract an acoustic ray bundle from a completed run's snapshots.
    ///
    /// Approximate: rays are integrated through the stored snapshots only,
    /// so fidelity is limited by the snapshot cadence; the inline bundle
    /// written during `run` is the reference.
    Trace {
        #[arg(long)]
        run: PathBuf,
    },
    /// Fit blow-up time and rates from a completed run directory.
    Analyze {
        #[arg(long)]
        run: PathBuf,
    },
    /// Emit self-similar profile tables (y, U, U', ODE residual) per n.
    Burgers {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 2, 3, 4])]
        n: Vec<u32>,
        #[arg(long, default_value = "burgers")]
        out: PathBuf,
    },
    /// Evaluate the 1D characteristic oracle for cubic-profile data.
    Oracle {
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long, default_value = "oracle.csv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RswError::Schema(_) | RswError::Json(_) | RswError::Format(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::GenData { config, out } => gen_data(config, out.as_deref()),
        Cmd::Run { config, data, out_dir } => cmd_run(config, data.as_deref(), out_dir.as_deref()),
        Cmd::Trace { run } => cmd_trace(run),
        Cmd::Analyze { run } => cmd_analyze(run),
        Cmd::Burgers { n, out } => cmd_burgers(n, out),
        Cmd::Oracle { t, out } => cmd_oracle(*t, out),
    }
}

fn gen_data(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir());
    std::fs::create_dir_all(&dir)?;
    let prepared = run::prepare(&cfg)?;
    io::save_snapshot(&dir.join("initial.snap"), &prepared.state)?;
    let report = serde_json::json!({
        "delta": prepared.delta,
        "ds_phi1_max": prepared.pulse_data.as_ref().map(|d| d.ds_phi1_max),
        "shock_expected": prepared.pulse_data.as_ref().map(|d| d.shock_expected()),
        "tstar_predicted": prepared.tstar_predicted,
        "grid": cfg.grid,
    });
    io::write_json(&dir.join("gen_report.json"), &report)?;
    println!("wrote {}", dir.join("initial.snap").display());
    Ok(())
}

fn cmd_run(config: &Path, data: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir());
    std::fs::create_dir_all(&dir)?;
    let mut prepared = run::prepare(&cfg)?;
    if let Some(p) = data {
        let snap = io::load_snapshot(p)?;
        if *snap.grid() != cfg.grid {
            return Err(RswError::Schema(format!(
                "snapshot grid {:?} does not match config grid {:?}",
                snap.grid(),
                cfg.grid
            )));
        }
        prepared.state = snap;
    }

    let mut writer = io::SeriesWriter::create(&dir.join("series.csv"))?;
    let mut snap_times: Vec<f64> = cfg.output.snapshot_times.clone();
    snap_times.sort_by(f64::total_cmp);
    let mut next_snap = 0usize;
    let mut hook_err: Option<RswError> = None;
    let delta = prepared.delta;
    let tstar_predicted = prepared.tstar_predicted;
    let outcome = run::run_with_hook(&cfg, prepared, |state, row| {
        if hook_err.is_some() {
            return;
        }
        if let Err(e) = writer.write_row(row) {
            hook_err = Some(e);
            return;
        }
        while next_snap < snap_times.len() && state.t >= snap_times[next_snap] - 1e-12 {
            let name = format!("snap_{:04}.snap", next_snap);
            if let Err(e) = io::save_snapshot(&dir.join(name), state) {
                hook_err = Some(e);
                return;
            }
            next_snap += 1;
        }
    })?;
    writer.flush()?;
    if let Some(e) = hook_err {
        return Err(e);
    }
    io::save_snapshot(&dir.join("final.snap"), &outcome.state)?;
    if let Some(bundle) = &outcome.bundle {
        write_rays_csv(&dir.join("rays.csv"), bundle)?;
    }

    let slope_k = tstar_predicted.map(|ts| 2.0 / (3.0 * ts)).unwrap_or(0.0);
    io::emit_plots(&dir, slope_k)?;
    let manifest = serde_json::json!({
        "config": cfg,
        "delta": delta,
        "status": outcome.status,
        "steps": outcome.steps,
        "switched_at": outcome.switched_at,
        "tstar_predicted": tstar_predicted,
        "m_discrepancy_max": outcome.m_discrepancy_max,
        "final_t": outcome.state.t,
    });
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    println!(
        "status {:?} t {:.6} steps {}",
        outcome.status, outcome.state.t, outcome.steps
    );
    // A non-finite failure before any steepening points at the solver, not
    // the physics; surface it as a hard error.
    if outcome.status == RunStatus::PositivityLoss {
        return Err(RswError::PositivityLoss(f64::NAN));
    }
    Ok(())
}

fn write_rays_csv(path: &Path, bundle: &RayBundle) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "u_label,theta_label,x1,x2,that1,that2,mu,alive")?;
    for r in &bundle.rays {
        writeln!(
            f,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            r.u_label,
            r.theta_label,
            r.x[0],
            r.x[1],
            r.that[0],
            r.that[1],
            r.mu,
            r.alive as u8
        )?;
    }
    Ok(())
}

fn cmd_trace(run_dir: &Path) -> Result<()> {
    let manifest: serde_json::Value = {
        let text = std::fs::read_to_string(run_dir.join("manifest.json"))?;
        serde_json::from_str(&text)?
    };
    let cfg: RunConfig = serde_json::from_value(
        manifest
            .get("config")
            .cloned()
            .ok_or_else(|| RswError::Schema("manifest.json lacks a config".into()))?,
    )?;
    let ray_cfg = cfg.rays.clone().unwrap_or_default();
    let delta = manifest
        .get("delta")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| RswError::Schema("manifest.json lacks delta".into()))?;

    // gather snapshots in time order: initial-style snap_*.snap plus final
    let mut snaps: Vec<PathBuf> = std::fs::read_dir(run_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("snap_") && n.ends_with(".snap"))
                .unwrap_or(false)
        })
        .collect();
    snaps.sort();
    snaps.push(run_dir.join("final.snap"));
    let first = io::load_snapshot(
        snaps
            .first()
            .ok_or_else(|| RswError::Schema("run dir holds no snapshots".into()))?,
    )?;
    let mut prev = SampledFields::compute(&first);
    let mut prev_t = first.t;
    let mut bundle = RayBundle::seed(&ray_cfg, delta, cfg.grid.x2_period, &prev)?;
    for p in &snaps[1..] {
        let state = io::load_snapshot(p)?;
        let next = SampledFields::compute(&state);
        let span = state.t - prev_t;
        if span > 0.0 {
            // a few substeps per snapshot gap; fields interpolate linearly
            let nsub = 8;
            let dt = span / nsub as f64;
            for _ in 0..nsub {
                bundle.advance(&prev, &next, dt);
            }
        }
        prev = next;
        prev_t = state.t;
    }
    write_rays_csv(&run_dir.join("rays_traced.csv"), &bundle)?;
    println!("traced {} rays across {} snapshots", bundle.rays.len(), snaps.len());
    Ok(())
}

fn cmd_analyze(run_dir: &Path) -> Result<()> {
    let series = io::load_series(&run_dir.join("series.csv"))?;
    let manifest: serde_json::Value = {
        let text = std::fs::read_to_string(run_dir.join("manifest.json"))?;
        serde_json::from_str(&text)?
    };
    let switched_at = manifest.get("switched_at").and_then(|v| v.as_f64());
    let t: Vec<f64> = series.iter().map(|r| r.t).collect();
    let g1: Vec<f64> = series.iter().map(|r| r.max_grad_v1).collect();
    let gh: Vec<f64> = series.iter().map(|r| r.max_grad_h).collect();
    let gz: Vec<f64> = series.iter().map(|r| r.max_grad_zeta).collect();
    let mu: Vec<f64> = series.iter().map(|r| r.mu_min).collect();
    let estimate = estimate_blowup_time(&t, &g1, Some(&mu), switched_at);

    let rates = estimate.as_ref().ok().map(|est| {
        let ts = est.tstar_mu.unwrap_or(est.tstar_grad);
        serde_json::json!({
            "tstar_used": ts,
            "v1": rate_fit(&t, &g1, ts),
            "h": rate_fit(&t, &gh, ts),
            "zeta": rate_fit(&t, &gz, ts),
        })
    });
    let max_xi_drift = series.iter().fold(0.0f64, |m, r| m.max(r.xi_drift));
    let max_sup_lf = series.iter().fold(0.0f64, |m, r| m.max(r.sup_lf_rho));
    let report = serde_json::json!({
        "rows": series.len(),
        "final_t": t.last(),
        "estimate": estimate.as_ref().ok(),
        "estimate_error": estimate.as_ref().err().map(|e| e.to_string()),
        "rates": rates,
        "max_xi_drift": max_xi_drift,
        "max_sup_lf_rho": max_sup_lf,
    });
    io::write_json(&run_dir.join("report.json"), &report)?;
    println!("wrote {}", run_dir.join("report.json").display());
    Ok(())
}

fn cmd_burgers(ns: &[u32], out: &Path) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(out)?;
    for &n in ns {
        let profile = BurgersProfile::new(n);
        let path = out.join(format!("profile_n{n}.csv"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "y,u,du,residual")?;
        for k in 0..=1000 {
            let y = -6.0 + 12.0 * k as f64 / 1000.0;
            let u = profile.eval(y);
            let du = profile.deriv(y);
            writeln!(
                f,
                "{:.17e},{:.17e},{:.17e},{:.3e}",
                y,
                u,
                du,
                profile.ode_residual(y)
            )?;
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_oracle(t: f64, out: &Path) -> Result<()> {
    use std::io::Write;
    // cubic ramp u0 = -x/(1+x^2): min slope -1 at x=0, so T* = 1
    let oracle = Burgers1dOracle::new(
        |x: f64| -x / (1.0 + x * x),
        |x: f64| (x * x - 1.0) / (1.0 + x * x).powi(2),
        -8.0,
        8.0,
    );
    let mut f = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(f, "x,u")?;
    for k in 0..=800 {
        let x = -4.0 + 8.0 * k as f64 / 800.0;
        writeln!(f, "{:.17e},{:.17e}", x, oracle.eval(x, t)?)?;
    }
    println!("wrote {} (T*_exact = 1)", out.display());
    Ok(())
}
