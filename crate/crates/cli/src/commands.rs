//! Subcommand implementations. All JSON outputs carry `"schema": 1`; CSV
//! outputs are plain text with a header row. Batch and sweep commands accept
//! `--jobs` and produce identical bytes for any worker count.

use crate::source::{load, write_output, LoadedModel};
use crate::{CliError, ModelArgs};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use warm_core::dynamics::{flow as run_flow, FlowOptions, SimplexPoint};
use warm_core::equilibria::{
    find_equilibria_with, star_structured_eigen, triangle_structured_eigen,
    whisker_structured_eigen, EquilibriumCatalog, SearchOptions,
};
use warm_core::model::{check_symmetry, GraphSpec, WarmModel};
use warm_core::reduction;
use warm_core::simulate;
use warm_core::thresholds;

fn catalog_with(
    model: &WarmModel,
    starts: usize,
    tol_residual: f64,
    eig_eps: f64,
    dedup: f64,
) -> EquilibriumCatalog {
    find_equilibria_with(
        model,
        &SearchOptions {
            starts_per_face: starts,
            residual_tol: tol_residual,
            eig_eps,
            dedup_radius: dedup,
            ..Default::default()
        },
    )
}

/// Cross-checks catalogue entries against the family's closed-form spectra;
/// any disagreement beyond 1e-8 is an internal consistency failure (exit 4).
fn structured_cross_check(
    loaded: &LoadedModel,
    catalog: &EquilibriumCatalog,
) -> Result<(), CliError> {
    let Some(spec) = &loaded.family else {
        return Ok(());
    };
    let alpha = catalog.alpha;
    let compare = |structured: Vec<(f64, usize)>, eq_idx: usize| -> Result<(), CliError> {
        let mut expanded: Vec<f64> = Vec::new();
        for (val, mult) in structured {
            for _ in 0..mult {
                expanded.push(val);
            }
        }
        expanded.sort_by(f64::total_cmp);
        let dense = &catalog.equilibria[eq_idx].eigenvalues;
        for (s, z) in expanded.iter().zip(dense.iter()) {
            if (s - z.re).abs() > 1e-8 || z.im.abs() > 1e-8 {
                return Err(CliError::consistency(format!(
                    "structured eigenvalue {s} disagrees with dense {z} at equilibrium {eq_idx}"
                )));
            }
        }
        Ok(())
    };
    match spec.family.as_str() {
        "triangle" => {
            for (i, eq) in catalog.equilibria.iter().enumerate() {
                let p = eq.point.as_slice();
                // (v, u, u) shapes up to permutation, interior only.
                let mut s = p.to_vec();
                s.sort_by(|a, b| b.total_cmp(a));
                if s[2] > 0.0 && (s[1] - s[2]).abs() < 1e-12 && (s[0] - s[1]).abs() > 1e-9 {
                    let eig = triangle_structured_eigen(s[0], s[1], alpha)
                        .map_err(|e| CliError::consistency(e.to_string()))?;
                    compare(eig.into_iter().map(|x| (x, 1)).collect(), i)?;
                }
            }
        }
        "star" => {
            let n = loaded.model.n();
            for (i, eq) in catalog.equilibria.iter().enumerate() {
                let mut s = eq.point.as_slice().to_vec();
                s.sort_by(|a, b| b.total_cmp(a));
                if s[n - 1] <= 0.0 {
                    continue;
                }
                let v = s[0];
                let u = s[n - 1];
                let k = s.iter().filter(|&&x| (x - v).abs() < 1e-9).count();
                if k == n || (v - u).abs() < 1e-9 {
                    continue;
                }
                if s.iter()
                    .all(|&x| (x - v).abs() < 1e-9 || (x - u).abs() < 1e-9)
                {
                    let eig = star_structured_eigen(n, k, v, u, alpha)
                        .map_err(|e| CliError::consistency(e.to_string()))?;
                    compare(eig, i)?;
                }
            }
        }
        "whisker" => {
            let (Some(r), Some(s)) = (spec.params.r, spec.params.s) else {
                return Ok(());
            };
            if r != s {
                return Ok(());
            }
            for (i, eq) in catalog.equilibria.iter().enumerate() {
                let p = eq.point.as_slice();
                let hub = p[r];
                if hub <= 0.0 {
                    continue;
                }
                let leaf = p[0];
                let two_level = p.iter().enumerate().all(|(j, &x)| {
                    if j == r {
                        true
                    } else {
                        (x - leaf).abs() < 1e-9
                    }
                });
                if two_level && leaf > 0.0 && (hub - leaf).abs() > 1e-9 {
                    let eig = whisker_structured_eigen(r, leaf, hub, alpha)
                        .map_err(|e| CliError::consistency(e.to_string()))?;
                    compare(eig, i)?;
                }
            }
        }
        _ => {}
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn equilibria(
    args: &ModelArgs,
    starts: usize,
    tol_residual: f64,
    eig_eps: f64,
    dedup: f64,
    strict: bool,
    out: Option<&str>,
) -> Result<(), CliError> {
    let loaded = load(args)?;
    let catalog = catalog_with(&loaded.model, starts, tol_residual, eig_eps, dedup);
    structured_cross_check(&loaded, &catalog)?;
    let json = serde_json::to_string_pretty(&catalog.to_json()).expect("catalogue serializes");
    write_output(out, &format!("{json}\n"))?;
    if strict && catalog.meta.newton_failures > 0 {
        return Err(CliError::strict(format!(
            "{} Newton starts failed to converge",
            catalog.meta.newton_failures
        )));
    }
    Ok(())
}

pub fn threshold(args: &ModelArgs, kind: Option<&str>, out: Option<&str>) -> Result<(), CliError> {
    // Family-based thresholds do not need a full model; `uniform` does.
    let kind_owned;
    let kind = match kind {
        Some(k) => k,
        None => {
            kind_owned = args.family.clone().unwrap_or_else(|| "uniform".into());
            &kind_owned
        }
    };
    let params = crate::source::parse_params(&args.params)?;
    let missing = |what: &str| CliError::validation(format!("threshold {kind} needs {what}"));
    let result = match kind {
        "star" => {
            let n = params.n.ok_or_else(|| missing("n"))?;
            let g =
                warm_core::model::build_star(n).map_err(|e| CliError::validation(e.to_string()))?;
            let model = warm_core::model::graph_to_warm(&g, 2.0)
                .map_err(|e| CliError::validation(e.to_string()))?;
            let mut t = thresholds::uniform_threshold(&model)
                .map_err(|e| CliError::validation(e.to_string()))?;
            t.family = "star".into();
            t.params = serde_json::json!({ "n": n });
            t
        }
        "cycle" | "triangle" => {
            let n = if kind == "triangle" {
                3
            } else {
                params.n.ok_or_else(|| missing("n"))?
            };
            thresholds::cycle_threshold(n).map_err(|e| CliError::validation(e.to_string()))?
        }
        "complete" => {
            let n_v = params.n_v.ok_or_else(|| missing("n_v"))?;
            thresholds::complete_threshold(n_v).map_err(|e| CliError::validation(e.to_string()))?
        }
        "fixed_m" => {
            let n = params.n.ok_or_else(|| missing("n"))?;
            let m = params.m.ok_or_else(|| missing("m"))?;
            match params.k {
                Some(k) => thresholds::reduced_fixed_m_threshold(n, m, k)
                    .map_err(|e| CliError::validation(e.to_string()))?,
                None => {
                    let model = warm_core::model::build_fixed_m(n, m)
                        .and_then(|d| d.with_alpha(2.0))
                        .map_err(|e| CliError::validation(e.to_string()))?;
                    let mut t = thresholds::uniform_threshold(&model)
                        .map_err(|e| CliError::validation(e.to_string()))?;
                    t.family = "fixed_m".into();
                    t.params = serde_json::json!({ "n": n, "m": m });
                    t
                }
            }
        }
        "star_tangency" => {
            let n = params.n.ok_or_else(|| missing("n"))?;
            let k = params.k.ok_or_else(|| missing("k"))?;
            thresholds::star_tangency_alpha(n, k)
                .map_err(|e| CliError::validation(e.to_string()))?
        }
        "whisker" => {
            let r = params.r.ok_or_else(|| missing("r"))?;
            thresholds::whisker_alpha_r(r).map_err(|e| CliError::validation(e.to_string()))?
        }
        "uniform" => {
            let loaded = load(args)?;
            thresholds::uniform_threshold(&loaded.model)
                .map_err(|e| CliError::validation(e.to_string()))?
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown threshold kind {other:?}"
            )))
        }
    };
    let mut value = serde_json::to_value(&result).expect("threshold serializes");
    value["schema"] = serde_json::json!(1);
    write_output(out, &format!("{value}\n"))?;
    Ok(())
}

fn alpha_grid(min: f64, max: f64, count: usize, log: bool) -> Result<Vec<f64>, CliError> {
    if !(min > 1.0) || max <= min || count < 2 {
        return Err(CliError::validation(
            "need 1 < alpha-min < alpha-max and count >= 2 for a sweep",
        ));
    }
    Ok((0..count)
        .map(|i| {
            let s = i as f64 / (count - 1) as f64;
            if log {
                (min.ln() + s * (max.ln() - min.ln())).exp()
            } else {
                min + s * (max - min)
            }
        })
        .collect())
}

/// Deterministic parallel map: chunks indices over `jobs` workers, collects
/// in index order.
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync>(count: usize, jobs: usize, f: F) -> Vec<T> {
    let jobs = jobs.max(1).min(count.max(1));
    if jobs <= 1 {
        return (0..count).map(f).collect();
    }
    let mut results: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let chunk = count.div_ceil(jobs);
    std::thread::scope(|scope| {
        for (w, slab) in results.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (off, slot) in slab.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + off));
                }
            });
        }
    });
    results
        .into_iter()
        .map(|x| x.expect("worker filled every slot"))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn phase(
    args: &ModelArgs,
    alpha_min: f64,
    alpha_max: f64,
    count: usize,
    log: bool,
    starts: usize,
    jobs: usize,
    out: Option<&str>,
) -> Result<(), CliError> {
    let loaded = load(&ModelArgs {
        alpha: args.alpha.or(Some(alpha_min.max(1.5))),
        ..args.clone()
    })?;
    let grid = alpha_grid(alpha_min, alpha_max, count, log)?;
    let n = loaded.model.n();
    let catalogs: Vec<EquilibriumCatalog> = parallel_map(grid.len(), jobs, |i| {
        let model = loaded.model.with_alpha(grid[i]).expect("grid is above 1");
        catalog_with(&model, starts, 1e-10, 1e-8, 1e-7)
    });

    // Branch bookkeeping: match sorted components to the previous step.
    let mut csv = String::new();
    write!(csv, "alpha,id").unwrap();
    for i in 0..n {
        write!(csv, ",x_{i}").unwrap();
    }
    writeln!(csv, ",max_re,class").unwrap();
    let mut prev: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut next_id = 0usize;
    for (alpha, catalog) in grid.iter().zip(&catalogs) {
        let mut current: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut claimed: Vec<bool> = vec![false; prev.len()];
        for eq in &catalog.equilibria {
            let mut sorted = eq.point.as_slice().to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let nearest = prev
                .iter()
                .enumerate()
                .filter(|(j, _)| !claimed[*j])
                .map(|(j, (id, p))| {
                    let d = p
                        .iter()
                        .zip(&sorted)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    (j, *id, d)
                })
                .min_by(|a, b| a.2.total_cmp(&b.2));
            let id = match nearest {
                Some((j, id, d)) if d < 0.05 => {
                    claimed[j] = true;
                    id
                }
                _ => {
                    next_id += 1;
                    next_id - 1
                }
            };
            write!(csv, "{alpha},{id}").unwrap();
            for x in &sorted {
                write!(csv, ",{x}").unwrap();
            }
            writeln!(csv, ",{},{}", eq.max_real_eigenvalue(), eq.class).unwrap();
            current.push((id, sorted));
        }
        prev = current;
    }
    write_output(out, &csv)?;
    Ok(())
}

pub fn simulate(
    args: &ModelArgs,
    steps: u64,
    runs: u64,
    base_seed: u64,
    record_stride: u64,
    jobs: usize,
    out_prefix: &str,
) -> Result<(), CliError> {
    if steps == 0 || runs == 0 {
        return Err(CliError::validation("need steps >= 1 and runs >= 1"));
    }
    let loaded = load(args)?;
    let model = &loaded.model;
    let catalog = catalog_with(model, 50, 1e-10, 1e-8, 1e-7);
    if catalog.equilibria.is_empty() {
        return Err(CliError::validation("equilibrium catalogue is empty"));
    }
    let sorted_matching = check_symmetry(model.dist()).weak;
    let summaries: Vec<simulate::RunSummary> = parallel_map(runs as usize, jobs, |i| {
        simulate::run(
            model,
            steps,
            base_seed.wrapping_add(i as u64),
            record_stride,
        )
        .expect("steps >= 1")
    });

    let mut csv = String::new();
    write!(csv, "seed").unwrap();
    for i in 0..model.n() {
        write!(csv, ",x_{i}").unwrap();
    }
    writeln!(csv, ",assigned,distance").unwrap();
    for s in &summaries {
        let (idx, dist) =
            simulate::nearest_endpoint(&catalog, &s.final_proportions, sorted_matching)
                .expect("catalogue is nonempty");
        write!(csv, "{}", s.seed).unwrap();
        for x in &s.final_proportions {
            write!(csv, ",{x}").unwrap();
        }
        if dist <= simulate::ASSIGNMENT_RADIUS {
            writeln!(csv, ",{idx},{dist}").unwrap();
        } else {
            writeln!(csv, ",unresolved,{dist}").unwrap();
        }
    }
    std::fs::write(format!("{out_prefix}_runs.csv"), csv)?;

    if record_stride > 0 {
        for (i, s) in summaries.iter().enumerate() {
            let mut csv = String::new();
            write!(csv, "t").unwrap();
            for c in 0..model.n() {
                write!(csv, ",x_{c}").unwrap();
            }
            writeln!(csv).unwrap();
            for (t, props) in s.trace.as_ref().expect("stride > 0 records traces") {
                write!(csv, "{t}").unwrap();
                for x in props {
                    write!(csv, ",{x}").unwrap();
                }
                writeln!(csv).unwrap();
            }
            std::fs::write(format!("{out_prefix}_trace_{i}.csv"), csv)?;
        }
    }
    Ok(())
}

pub fn flow(
    args: &ModelArgs,
    start: &str,
    seed: u64,
    t_max: f64,
    step: f64,
    record_stride: usize,
    out: Option<&str>,
) -> Result<(), CliError> {
    let loaded = load(args)?;
    let n = loaded.model.n();
    let v0 = match start {
        "barycenter" => SimplexPoint::barycenter(n),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..n)
                .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-6)
                .collect();
            SimplexPoint::project(raw).expect("positive vector projects")
        }
        csv => {
            let parts: Result<Vec<f64>, _> =
                csv.split(',').map(str::trim).map(str::parse).collect();
            let parts =
                parts.map_err(|_| CliError::validation(format!("bad start point {csv:?}")))?;
            SimplexPoint::new(parts).map_err(|e| CliError::validation(e.to_string()))?
        }
    };
    let opts = FlowOptions {
        t_max,
        step,
        record_stride,
        ..Default::default()
    };
    let traj =
        run_flow(&loaded.model, &v0, &opts).map_err(|e| CliError::validation(e.to_string()))?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    write_output(out, &String::from_utf8(buf).expect("csv is utf8"))?;
    Ok(())
}

fn require_graph(loaded: &LoadedModel) -> Result<&GraphSpec, CliError> {
    loaded
        .graph
        .as_ref()
        .ok_or_else(|| CliError::validation("this command needs a graph model (graph family)"))
}

pub fn reduce(
    args: &ModelArgs,
    what: &str,
    alpha_grid_text: &str,
    out: Option<&str>,
) -> Result<(), CliError> {
    let args_with_alpha = ModelArgs {
        alpha: args.alpha.or(Some(2.0)),
        ..args.clone()
    };
    let loaded = load(&args_with_alpha)?;
    let g = require_graph(&loaded)?;
    let value = match what {
        "collections" => {
            let cols = reduction::enumerate_spanning_collections(g)
                .map_err(|e| CliError::validation(e.to_string()))?;
            serde_json::json!({
                "schema": 1,
                "n_vertices": g.n_vertices(),
                "collections": cols,
            })
        }
        "star-forest" => {
            let alpha = loaded.model.alpha();
            let allocs = reduction::star_forest_allocation(g, alpha)
                .map_err(|e| CliError::validation(e.to_string()))?;
            let parts: Vec<serde_json::Value> = allocs
                .iter()
                .map(|a| {
                    serde_json::json!({
                        "parts": a.collection.parts,
                        "v": a.point.as_slice(),
                        "class": a.class,
                    })
                })
                .collect();
            serde_json::json!({ "schema": 1, "alpha": alpha, "allocations": parts })
        }
        "whisker-probe" => {
            let grid: Result<Vec<f64>, _> = alpha_grid_text
                .split(',')
                .map(str::trim)
                .map(str::parse)
                .collect();
            let grid = grid.map_err(|_| CliError::validation("bad --alpha-grid; want 2,5,10"))?;
            let entries = reduction::whisker_forest_probe(g, &grid)
                .map_err(|e| CliError::validation(e.to_string()))?;
            serde_json::json!({ "schema": 1, "probe": entries })
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown --what {other:?}; use collections|star-forest|whisker-probe"
            )))
        }
    };
    write_output(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
    )?;
    Ok(())
}

pub fn model_cmd(action: &str, args: &ModelArgs, out: Option<&str>) -> Result<(), CliError> {
    match action {
        "validate" => {
            let loaded = load(args)?;
            let value = serde_json::json!({
                "schema": 1,
                "valid": true,
                "n": loaded.model.n(),
                "alpha": loaded.model.alpha(),
                "fingerprint": format!("{:016x}", loaded.model.fingerprint()),
            });
            write_output(out, &format!("{value}\n"))?;
            Ok(())
        }
        "describe" => {
            let loaded = load(args)?;
            let model = &loaded.model;
            let rep = check_symmetry(model.dist());
            let bounds = warm_core::equilibria::support_lower_bound(model);
            let mut value = warm_core::model::model_to_json(model);
            value["symmetry"] = serde_json::to_value(&rep).unwrap();
            value["support_lower_bound"] = serde_json::json!(bounds);
            value["fingerprint"] = serde_json::json!(format!("{:016x}", model.fingerprint()));
            write_output(
                out,
                &format!("{}\n", serde_json::to_string_pretty(&value).unwrap()),
            )?;
            Ok(())
        }
        other => Err(CliError::validation(format!(
            "unknown action {other:?}; use validate|describe"
        ))),
    }
}
