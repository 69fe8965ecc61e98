//! Batch experiment driver: self-tests, recovery sweeps, ensemble
//! relaxation, diffuse comparison and limit-minimizer checks, with CSV
//! reports and a JSON sidecar echoing the full experiment spec.
//!
//! Exit codes: 0 success, 1 usage error, 2 invariant violation.

use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use okdrop::diffuse;
use okdrop::droplet_model::{format_g17, DensityMeasure, Droplet, DropletConfig};
use okdrop::limit_energy;
use okdrop::minimizer;
use okdrop::recovery;
use okdrop::sharp_energy;
use okdrop::torus::{abs_ln_eps, optimal_area, optimal_radius};
use okdrop::{build_green, green_selftest, TorusParams};

#[derive(Debug, Clone)]
struct ExperimentSpec {
    command: String,
    kappa: f64,
    delta_bar: f64,
    ell: f64,
    eps_list: Vec<f64>,
    grid_n: usize,
    seed: u64,
    gamma: f64,
    out: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            command: String::new(),
            kappa: 2.0 / 3.0,
            delta_bar: 1.0,
            ell: 1.0,
            eps_list: vec![1e-3, 1e-6, 1e-9, 1e-12],
            grid_n: 512,
            seed: 42,
            gamma: 1.0 / 6.0,
            out: PathBuf::from("okdrop-report"),
        }
    }
}

fn usage() -> String {
    "usage: okdrop <command> [--config FILE] [--kappa X] [--delta-bar X] [--ell X]\n\
     \x20              [--eps A,B,...] [--grid N] [--seed N] [--gamma X] [--out PATH]\n\
     commands: green-selftest | recover-sweep | relax | diffuse-compare | limit-check\n\
     A key=value config file provides defaults; flags override it.\n\
     OKDROP_THREADS caps the worker count."
        .to_string()
}

fn parse_eps_list(s: &str) -> Result<Vec<f64>, String> {
    let list: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let list = list.map_err(|e| format!("bad eps list '{s}': {e}"))?;
    if list.is_empty() {
        return Err("empty eps list".into());
    }
    let emax = (-1f64).exp();
    for w in list.windows(2) {
        if w[1] >= w[0] {
            return Err("eps list must be strictly decreasing".into());
        }
    }
    if list.iter().any(|&e| e <= 0.0 || e >= emax) {
        return Err("eps values must lie in (0, e^-1)".into());
    }
    Ok(list)
}

fn apply_kv(spec: &mut ExperimentSpec, key: &str, value: &str) -> Result<(), String> {
    let pf = |v: &str| v.parse::<f64>().map_err(|e| format!("bad value for {key}: {e}"));
    match key {
        "command" => spec.command = value.to_string(),
        "kappa" => spec.kappa = pf(value)?,
        "delta-bar" | "delta_bar" => spec.delta_bar = pf(value)?,
        "ell" => spec.ell = pf(value)?,
        "eps" => spec.eps_list = parse_eps_list(value)?,
        "grid" => {
            spec.grid_n = value
                .parse()
                .map_err(|e| format!("bad value for grid: {e}"))?
        }
        "seed" => {
            spec.seed = value
                .parse()
                .map_err(|e| format!("bad value for seed: {e}"))?
        }
        "gamma" => spec.gamma = pf(value)?,
        "out" => spec.out = PathBuf::from(value),
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

fn parse_args(args: &[String]) -> Result<ExperimentSpec, String> {
    let mut spec = ExperimentSpec::default();
    if args.is_empty() {
        return Err(usage());
    }
    spec.command = args[0].clone();
    // first pass: config file
    let mut i = 1;
    let mut flags: Vec<(String, String)> = Vec::new();
    while i < args.len() {
        let key = args[i]
            .strip_prefix("--")
            .ok_or_else(|| format!("expected --flag, got '{}'", args[i]))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| format!("missing value for --{key}"))?;
        if key == "config" {
            let text = std::fs::read_to_string(value)
                .map_err(|e| format!("cannot read config {value}: {e}"))?;
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format!("bad config line '{line}'"))?;
                apply_kv(&mut spec, k.trim(), v.trim())?;
            }
        } else {
            flags.push((key.to_string(), value.clone()));
        }
        i += 2;
    }
    // flags override the file
    for (k, v) in flags {
        apply_kv(&mut spec, &k, &v)?;
    }
    Ok(spec)
}

struct Report {
    csv: String,
    sidecar: serde_json::Value,
    failed: Option<String>,
}

fn spec_sidecar(spec: &ExperimentSpec) -> serde_json::Value {
    serde_json::json!({
        "command": spec.command,
        "kappa": spec.kappa,
        "delta_bar": spec.delta_bar,
        "ell": spec.ell,
        "eps": spec.eps_list,
        "grid": spec.grid_n,
        "seed": spec.seed,
        "gamma": spec.gamma,
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

fn emit_report(report: &Report, out: &Path) -> std::io::Result<()> {
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut csv = report.csv.clone();
    if let Some(reason) = &report.failed {
        let _ = writeln!(csv, "FAILED {reason}");
    }
    std::fs::write(out.with_extension("csv"), csv)?;
    std::fs::write(
        out.with_extension("json"),
        serde_json::to_string_pretty(&report.sidecar).unwrap_or_default(),
    )?;
    Ok(())
}

fn params_of(spec: &ExperimentSpec) -> Result<TorusParams, okdrop::OkError> {
    TorusParams::new(spec.ell, spec.kappa, spec.delta_bar)
}

fn cmd_green_selftest(spec: &ExperimentSpec) -> Result<Report, String> {
    let params = params_of(spec).map_err(|e| e.to_string())?;
    let green = build_green(params, 256).map_err(|e| e.to_string())?;
    let rep: BTreeMap<String, f64> =
        green_selftest(&green, spec.grid_n).map_err(|e| e.to_string())?;
    let mut csv = String::from("identity,residual\n");
    for (k, v) in &rep {
        let _ = writeln!(csv, "{k},{}", format_g17(*v));
    }
    let pass = rep["integral_residual"] < 1e-6
        && rep["hh_conv_residual"] < 1e-4
        && rep["remainder_sup_refinement_gap"] < 1e-6
        && rep["min_g_on_grid"] > 0.0;
    let mut sidecar = spec_sidecar(spec);
    sidecar["report"] = serde_json::json!(rep);
    Ok(Report {
        csv,
        sidecar,
        failed: if pass {
            None
        } else {
            Some("green identity residuals exceed tolerances".into())
        },
    })
}

fn cmd_recover_sweep(spec: &ExperimentSpec) -> Result<Report, String> {
    let params = params_of(spec).map_err(|e| e.to_string())?;
    let green = build_green(params, 256).map_err(|e| e.to_string())?;
    let (mbar, _, _) = limit_energy::optimal_constant_density(&params);
    if mbar == 0.0 {
        return Err("delta-bar below critical: the optimal density is empty".into());
    }
    let mu = DensityMeasure::uniform(mbar, 128, params.ell).map_err(|e| e.to_string())?;
    let mass_target = mu.total_mass;
    let e0 = limit_energy::limit_energy_constant(mbar, &params);
    let bg = sharp_energy::background_term(&params);
    let e0_target = e0 - bg;
    let mut csv = String::from(
        "eps,abs_ln_eps,n_droplets,eta,radius,mass,perimeter_term,area_term,self_interaction,pair_interaction,e_bar,e0_target,gap\n",
    );
    let mut gaps = Vec::new();
    let mut rows = Vec::new();
    for &eps in &spec.eps_list {
        let plan = recovery::partition_counts(&mu, eps, &params, spec.seed)
            .map_err(|e| e.to_string())?;
        let config =
            recovery::build_recovery(&mu, eps, &params, spec.seed).map_err(|e| e.to_string())?;
        let breakdown =
            sharp_energy::sharp_energy(&config, &green).map_err(|e| e.to_string())?;
        let stats =
            okdrop::droplet_model::rescaled_stats(&config).map_err(|e| e.to_string())?;
        let mass = stats.total_area() / abs_ln_eps(eps);
        let defect = minimizer::defect_m(&config, &green, spec.gamma, 0.05, params.ell / 8.0)
            .map_err(|e| e.to_string())?;
        let gap = (breakdown.total_rescaled - e0_target).abs();
        gaps.push((gap, defect));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            format_g17(eps),
            format_g17(abs_ln_eps(eps)),
            config.droplets.len(),
            format_g17(plan.eta),
            format_g17(plan.radius),
            format_g17(mass),
            format_g17(breakdown.perimeter_term),
            format_g17(breakdown.area_term),
            format_g17(breakdown.self_interaction),
            format_g17(breakdown.pair_interaction),
            format_g17(breakdown.total_rescaled),
            format_g17(e0_target),
            format_g17(gap)
        );
        rows.push(serde_json::json!({
            "eps": eps,
            "n": config.droplets.len(),
            "gap": gap,
            "defect_m": defect,
        }));
    }
    let decreasing = gaps.windows(2).all(|w| w[1].0 < w[0].0);
    let relative_final = gaps.last().map(|g| g.0 / e0_target.abs()).unwrap_or(1.0);
    let defect_ok = gaps.iter().all(|g| g.1 >= -1e-9);
    let verdict = decreasing && relative_final < 0.25 && defect_ok;
    let _ = writeln!(
        csv,
        "verdict,gap_strictly_decreasing={decreasing},relative_final_gap={},defect_nonnegative={defect_ok}",
        format_g17(relative_final)
    );
    let mut sidecar = spec_sidecar(spec);
    sidecar["mu_bar"] = serde_json::json!(mbar);
    sidecar["mass_target"] = serde_json::json!(mass_target);
    sidecar["rows"] = serde_json::json!(rows);
    Ok(Report {
        csv,
        sidecar,
        failed: if verdict {
            None
        } else {
            Some("recovery sweep verdict failed".into())
        },
    })
}

fn cmd_relax(spec: &ExperimentSpec) -> Result<Report, String> {
    use rand::Rng;
    use rand::SeedableRng;
    let params = params_of(spec).map_err(|e| e.to_string())?;
    let green = build_green(params, 128).map_err(|e| e.to_string())?;
    let eps = *spec.eps_list.last().unwrap();
    let (mbar, _, _) = limit_energy::optimal_constant_density(&params);
    if mbar == 0.0 {
        return Err("delta-bar below critical: nothing to relax".into());
    }
    let mu = DensityMeasure::uniform(mbar, 128, params.ell).map_err(|e| e.to_string())?;
    let plan =
        recovery::partition_counts(&mu, eps, &params, spec.seed).map_err(|e| e.to_string())?;
    let centers = recovery::place_droplets(&plan).map_err(|e| e.to_string())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let droplets: Vec<Droplet> = centers
        .into_iter()
        .map(|c| {
            let scale: f64 = rng.random_range(0.5..2.0);
            Droplet::disk(c, optimal_radius(eps) * scale.sqrt())
        })
        .collect();
    let config = DropletConfig::new(params, eps, droplets).map_err(|e| e.to_string())?;
    let relaxed = minimizer::relax_alternating(&config, &green, 4, 30, 0.02 * params.ell)
        .map_err(|e| e.to_string())?;
    let mut csv =
        String::from("step,e_bar,max_gradient,min_pair_distance,area_mean,area_std\n");
    for row in &relaxed.trace {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.step,
            format_g17(row.e_bar),
            format_g17(row.max_gradient),
            format_g17(row.min_pair_distance),
            format_g17(row.area_mean),
            format_g17(row.area_std)
        );
    }
    let monotone = relaxed
        .trace
        .windows(2)
        .all(|w| w[1].e_bar <= w[0].e_bar + 1e-12);
    let stats =
        minimizer::ensemble_stats(&relaxed.config, spec.gamma).map_err(|e| e.to_string())?;
    let _ = writeln!(
        csv,
        "final,area_mean_over_optimal={},area_cv={},count_density={}",
        format_g17(stats.area_mean / optimal_area()),
        format_g17(stats.area_variance.sqrt() / stats.area_mean.max(1e-300)),
        format_g17(stats.count_density)
    );
    let mut sidecar = spec_sidecar(spec);
    sidecar["final_config"] =
        serde_json::json!(okdrop::droplet_model::config_to_text(&relaxed.config));
    Ok(Report {
        csv,
        sidecar,
        failed: if monotone {
            None
        } else {
            Some("descent trace not monotone".into())
        },
    })
}

fn cmd_diffuse_compare(spec: &ExperimentSpec) -> Result<Report, String> {
    let green_params = params_of(spec).map_err(|e| e.to_string())?;
    let green = build_green(green_params, 128).map_err(|e| e.to_string())?;
    let mut csv = String::from("eps,grid,e_sharp,e_diffuse,ratio\n");
    let mut ratios = Vec::new();
    let mut grid_n = spec.grid_n;
    for &eps in &spec.eps_list {
        let r = optimal_radius(eps);
        let config = DropletConfig::new(
            green_params,
            eps,
            vec![Droplet::disk([0.5 * spec.ell, 0.5 * spec.ell], r)],
        )
        .map_err(|e| e.to_string())?;
        let report =
            diffuse::compare_energies(&config, &green, grid_n).map_err(|e| e.to_string())?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            format_g17(eps),
            grid_n,
            format_g17(report.e_sharp_physical),
            format_g17(report.e_diffuse_lifted),
            format_g17(report.ratio_lifted)
        );
        ratios.push(report.ratio_lifted);
        grid_n *= 2; // halve eps -> double the grid to keep interfaces resolved
    }
    let in_band = ratios.iter().all(|r| *r > 0.5 && *r < 1.5);
    let mut sidecar = spec_sidecar(spec);
    sidecar["ratios"] = serde_json::json!(ratios);
    Ok(Report {
        csv,
        sidecar,
        failed: if in_band {
            None
        } else {
            Some("diffuse/sharp ratio left the sanity band".into())
        },
    })
}

fn cmd_limit_check(spec: &ExperimentSpec) -> Result<Report, String> {
    let params = params_of(spec).map_err(|e| e.to_string())?;
    let (mbar, emin, delta_c) = limit_energy::optimal_constant_density(&params);
    let m_star = okdrop::special::golden_section_refined(
        |m| limit_energy::limit_energy_constant(m, &params),
        0.0,
        (2.0 * mbar).max(1.0),
        1e-12,
    );
    let numeric_matches = if mbar > 0.0 {
        ((m_star - mbar) / mbar).abs() < 1e-8
    } else {
        m_star.abs() < 1e-8
    };
    let branch = if params.delta_bar <= delta_c { "empty" } else { "constant" };
    let mut csv = String::from("quantity,value\n");
    let _ = writeln!(csv, "delta_c,{}", format_g17(delta_c));
    let _ = writeln!(csv, "mu_bar,{}", format_g17(mbar));
    let _ = writeln!(csv, "min_energy_density,{}", format_g17(emin));
    let _ = writeln!(csv, "numeric_argmin,{}", format_g17(m_star));
    let _ = writeln!(csv, "branch,{branch}");
    let mut sidecar = spec_sidecar(spec);
    sidecar["mu_bar"] = serde_json::json!(mbar);
    sidecar["branch"] = serde_json::json!(branch);
    Ok(Report {
        csv,
        sidecar,
        failed: if numeric_matches {
            None
        } else {
            Some("numeric minimizer disagrees with the closed form".into())
        },
    })
}

fn run(spec: &ExperimentSpec) -> Result<Report, String> {
    match spec.command.as_str() {
        "green-selftest" => cmd_green_selftest(spec),
        "recover-sweep" => cmd_recover_sweep(spec),
        "relax" => cmd_relax(spec),
        "diffuse-compare" => cmd_diffuse_compare(spec),
        "limit-check" => cmd_limit_check(spec),
        other => Err(format!("unknown command '{other}'\n{}", usage())),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("OKDROP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = match parse_args(&args) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    match run(&spec) {
        Ok(report) => {
            if let Err(e) = emit_report(&report, &spec.out) {
                eprintln!("cannot write report: {e}");
                return ExitCode::from(1);
            }
            match report.failed {
                None => {
                    println!("ok: report written to {}", spec.out.display());
                    ExitCode::SUCCESS
                }
                Some(reason) => {
                    eprintln!("invariant violated: {reason}");
                    ExitCode::from(2)
                }
            }
        }
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
