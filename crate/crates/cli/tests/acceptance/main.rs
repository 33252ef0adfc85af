//! Acceptance gates. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod oracles;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use platewise::corpus::{read_foods, FoodRecord, FoodTable, MealItem};
use platewise::metrics::{amdr_composite, energy_density, hill_diversity, mar, mer, rdi_deviation, AmdrBounds};
use platewise::portioner::{
    convert_vitamin_d, nutrient_totals, solve_portions, MealEnergyPlan, Orientation, PortionConstraints,
    PortionObjective, RdiProfile, SolverOptions,
};
use platewise::stats::{bh_fdr, hurdle_test, mann_whitney_u, EXACT_MAX_GROUP};
use platewise::substitution::{select_pooled, select_winner, sweep_theta, SubstitutionCandidate, TradeoffParams, DEFAULT_THETA_GRID};
use platewise::synth::{portion_instance, SynthConfig};
use platewise::{MealType, Nutrient};
use platewise_cli::stages::{names, read_candidates};
use platewise_cli::{run_all, write_synthetic, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const ORACLE_INSTANCES: u64 = 100;
const ORACLE_SAMPLES: usize = 10_000;

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Result<String>) {
        match f() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(e) => {
                self.failures += 1;
                println!("FAIL {name}: {e:#}");
            }
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn metric_fixtures() -> Result<String> {
    let t0 = Instant::now();
    let tol = 1e-9;
    let limits = [2300.0, 20.0, 50.0];
    ensure!(close(mer(&limits, &limits), 1.0, tol), "mer at limits");
    ensure!(close(mer(&[4600.0, 20.0, 50.0], &limits), 4.0 / 3.0, tol), "mer doubled sodium");
    ensure!(close(mer(&[0.0; 3], &limits), 0.0, tol), "mer zero");

    let rdi = [1300.0, 18.0, 11.0, 900.0, 90.0, 1.7, 2.4, 1.2, 1.3, 16.0, 400.0];
    let above: Vec<f64> = rdi.iter().map(|r| r * 1.5).collect();
    ensure!(close(mar(&above, &rdi), 1.0, tol), "mar above rdi");
    let mut half_iron = rdi;
    half_iron[1] = 9.0;
    ensure!(close(mar(&half_iron, &rdi), 10.5 / 11.0, tol), "mar half iron");
    ensure!(close(mar(&[0.0; 11], &rdi), 0.0, tol), "mar zero");

    let b = AmdrBounds::default();
    ensure!(close(amdr_composite([20.0, 30.0, 50.0], &b), 1.0, tol), "amdr inside");
    ensure!(close(amdr_composite([5.0, 50.0, 45.0], &b), 1.0 / 3.0, tol), "amdr carb only");
    ensure!(close(amdr_composite([10.0, 20.0, 45.0], &b), 1.0, tol), "amdr boundaries");

    ensure!(close(hill_diversity(&[1.0], 1.0)?, 1.0, tol), "hill single");
    ensure!(close(hill_diversity(&[0.25; 4], 1.0)?, 4.0, tol), "hill uniform");
    ensure!(close(hill_diversity(&[0.5, 0.5], 1.0)?, 2.0, tol), "hill halves");

    ensure!(close(energy_density(500.0, 250.0)?, 2.0, tol), "energy density 2");
    ensure!(close(energy_density(0.0, 100.0)?, 0.0, tol), "energy density 0");
    ensure!(close(energy_density(800.0, 800.0)?, 1.0, tol), "energy density 1");

    let panel: Vec<Nutrient> = Nutrient::ALL[..10].to_vec();
    let targets = [2.0; platewise::NUTRIENT_COUNT];
    ensure!(close(rdi_deviation(&targets, &targets, &panel), 0.0, tol), "deviation exact");
    let mut one = targets;
    one[panel[3].index()] = 4.0;
    ensure!(close(rdi_deviation(&one, &targets, &panel), 10.0, tol), "deviation one doubled");
    let all = [3.0; platewise::NUTRIENT_COUNT];
    ensure!(close(rdi_deviation(&all, &targets, &panel), 50.0, tol), "deviation all 1.5x");

    let profile = RdiProfile::<f64>::default();
    let per_kcal = profile.per_kcal_targets();
    ensure!(close(per_kcal[Nutrient::Protein.index()], 0.025, tol), "protein per kcal");
    ensure!(close(per_kcal[Nutrient::Energy.index()], 1.0, tol), "energy per kcal");
    ensure!(close(per_kcal[Nutrient::Sodium.index()], 1.15, tol), "sodium per kcal");
    ensure!(close(convert_vitamin_d(800.0, "IU")?, 20.0, tol), "800 IU");
    ensure!(close(convert_vitamin_d(0.0, "IU")?, 0.0, tol), "0 IU");
    ensure!(close(convert_vitamin_d(40.0, "IU")?, 1.0, tol), "40 IU");
    let plan = MealEnergyPlan::default();
    ensure!(close(profile.meal_targets(MealType::Breakfast, &plan)[Nutrient::Fiber.index()], 7.0, tol), "breakfast fiber");
    ensure!(close(plan.energy_target(MealType::Dinner, profile.reference_energy), 800.0, tol), "dinner energy");

    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "fixture suite took {secs:.3} s");
    Ok(format!("all fixtures within 1e-9 in {secs:.4} s"))
}

struct OracleRun {
    mean_solve: f64,
    worst_gap: f64,
    infeasible: Vec<String>,
    beaten: Vec<String>,
}

fn run_portioner_oracle() -> Result<OracleRun> {
    let profile = RdiProfile::<f64>::default();
    let plan = MealEnergyPlan::default();
    let cons = PortionConstraints::default();
    let mut run = OracleRun { mean_solve: 0.0, worst_gap: f64::NEG_INFINITY, infeasible: Vec::new(), beaten: Vec::new() };
    for seed in 0..ORACLE_INSTANCES {
        let inst = portion_instance(seed);
        let foods: Vec<&FoodRecord> = inst.foods.iter().collect();
        let mt = inst.meal_type;
        let energy = plan.energy_target(mt, profile.reference_energy);
        let obj = PortionObjective::new(&profile, &profile.meal_targets(mt, &plan), Orientation::Labels, true);

        let t0 = Instant::now();
        let sol = solve_portions(&foods, &profile, mt, &plan, &cons, &SolverOptions { seed, ..Default::default() })
            .with_context(|| format!("instance {seed}"))?;
        run.mean_solve += t0.elapsed().as_secs_f64() / ORACLE_INSTANCES as f64;

        let kcal = sol.nutrient_totals[Nutrient::Energy.index()];
        if !oracles::feasible(&sol.portions, &foods, mt, energy, &cons, 1e-6) || !close(kcal, energy, 0.01 * energy) {
            run.infeasible.push(format!("instance {seed}"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (mut best, mut found, mut tries) = (f64::INFINITY, 0, 0);
        while found < ORACLE_SAMPLES && tries < 400 * ORACLE_SAMPLES {
            tries += 1;
            let x = oracles::random_portions(&mut rng, &foods, energy, cons.beverage_grams_max(mt));
            if oracles::feasible(&x, &foods, mt, energy, &cons, 0.0) {
                found += 1;
                best = best.min(obj.value(&nutrient_totals(&x, &foods)));
            }
        }
        ensure!(found == ORACLE_SAMPLES, "instance {seed}: only {found} feasible random samples");
        run.worst_gap = run.worst_gap.max(sol.objective - best);
        if sol.objective > best + 1e-9 {
            run.beaten.push(format!("instance {seed}: solver {} > random {best}", sol.objective));
        }
    }
    Ok(run)
}

fn lof_equivalence() -> Result<String> {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = if seed == 19 { 200 } else { 12 + 9 * seed as usize };
        let dims = 2 + seed as usize % 4;
        let k = [3, 5, 10, 20][seed as usize % 4].min(n - 1);
        let centers: Vec<Vec<f64>> = (0..3).map(|_| (0..dims).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let spread = if i % 17 == 0 { 4.0 } else { 0.7 };
                centers[i % 3].iter().map(|c| c + spread * rng.gen_range(-1.0..1.0)).collect()
            })
            .collect();
        let got = platewise::corpus::lof_scores(&points, k)?;
        let want = oracles::lof(&points, k);
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            ensure!(close(*g, *w, 1e-9), "seed {seed} point {i}: {g} vs reference {w}");
            worst = worst.max((g - w).abs());
        }
    }
    Ok(format!("20 seeds, n <= 200, max abs diff {worst:.2e}"))
}

fn bh_and_hurdle() -> Result<String> {
    let grid: Vec<f64> = (1..=20).map(|i| 0.005 * i as f64).collect();
    let mut bh_cases = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 1 + seed as usize % 12;
        // rounding produces ties
        let p: Vec<f64> = (0..m).map(|_| (rng.gen_range(0.0..0.12f64) * 1000.0).round() / 1000.0).collect();
        let adjusted = oracles::bh_adjusted(&p);
        let mut prev: Option<Vec<bool>> = None;
        for &q in &grid {
            let out = bh_fdr(&p, q);
            let want = oracles::bh_reject(&p, q);
            ensure!(out.reject == want, "seed {seed} q {q}: {:?} vs reference {:?} for {p:?}", out.reject, want);
            for (i, (a, b)) in out.q_values.iter().zip(&adjusted).enumerate() {
                ensure!(close(*a, *b, 1e-9), "seed {seed}: q-value {i} {a} vs {b}");
            }
            if let Some(prev) = &prev {
                ensure!(prev.iter().zip(&out.reject).all(|(a, b)| !a || *b), "seed {seed}: rejections shrink at q {q}");
            }
            prev = Some(out.reject);
            bh_cases += 1;
        }
    }

    let mut mw_cases = 0;
    let mut hurdle_cases = 0;
    for n1 in 1..=EXACT_MAX_GROUP {
        for n2 in 1..=EXACT_MAX_GROUP {
            let mut rng = ChaCha8Rng::seed_from_u64((n1 * 100 + n2) as u64);
            let x: Vec<f64> = (0..n1).map(|_| rng.gen_range(1..8) as f64).collect();
            let y: Vec<f64> = (0..n2).map(|_| rng.gen_range(2..10) as f64).collect();
            let got = mann_whitney_u(&x, &y);
            let want = oracles::mann_whitney(&x, &y);
            ensure!(got.exact, "{n1}x{n2}: exact path not taken");
            ensure!(close(got.p_value, want, 1e-9), "mann-whitney {n1}x{n2}: {} vs {want}", got.p_value);
            mw_cases += 1;

            let inside: Vec<f64> = (0..n1).map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(1..6) as f64 }).collect();
            let outside: Vec<f64> = (0..n2).map(|_| if rng.gen_bool(0.6) { 0.0 } else { rng.gen_range(1..9) as f64 }).collect();
            let got = hurdle_test(&inside, &outside).p_value;
            let want = oracles::hurdle(&inside, &outside);
            ensure!(close(got, want, 1e-9), "hurdle {n1}x{n2}: {got} vs {want}");
            hurdle_cases += 1;
        }
    }
    Ok(format!("{bh_cases} BH cases over a 20-point q grid, {mw_cases} Mann-Whitney and {hurdle_cases} hurdle cases"))
}

fn random_candidate(rng: &mut ChaCha8Rng, id: usize) -> SubstitutionCandidate {
    let cheaper = rng.gen_bool(0.6);
    let delta = rng.gen_range(0.0..40.0);
    SubstitutionCandidate {
        source_meal_id: "m".into(),
        candidate_id: format!("c{id}"),
        added: vec![format!("a{id}")],
        removed: vec![format!("r{id}")],
        k_sub: 1,
        health_gain: rng.gen_range(-5.0..40.0),
        saving: if cheaper { delta } else { 0.0 },
        cost_increase: if cheaper { 0.0 } else { delta },
        effort: rng.gen_range(0.0..1.0),
        portion_shift_pct: rng.gen_range(0.0..50.0),
        within_category: rng.gen_bool(0.5),
        adds_mixed_dish: rng.gen_bool(0.3),
    }
}

fn substitution_monotonicity() -> Result<String> {
    let mut steps = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(5..40);
        let pool: Vec<SubstitutionCandidate> = (0..n).map(|i| random_candidate(&mut rng, i)).collect();
        let mut prev: Option<(f64, f64, f64)> = None;
        for theta in DEFAULT_THETA_GRID {
            let Some((w, _)) = select_pooled(&pool, &TradeoffParams::with_theta(theta)) else { continue };
            let cur = (theta, w.health_gain - w.cost_increase, w.saving);
            if let Some(p) = prev {
                ensure!(cur.1 >= p.1 - 1e-12, "pool {seed}: H - CI fell from {} to {} at theta {theta}", p.1, cur.1);
                ensure!(cur.2 <= p.2 + 1e-12, "pool {seed}: S rose from {} to {} at theta {theta}", p.2, cur.2);
                steps += 1;
            }
            prev = Some(cur);
        }
    }
    Ok(format!("50 pools, {steps} theta steps, 0 violations"))
}

fn winner_examples() -> Result<String> {
    let p = TradeoffParams::with_theta(1.0);
    // at theta 1, V = (H + S) / 2 with CI = 0
    let with_v = |id: &str, v: f64, within: bool, mixed: bool| SubstitutionCandidate {
        source_meal_id: "m".into(),
        candidate_id: id.into(),
        added: vec![format!("{id}+")],
        removed: vec![format!("{id}-")],
        k_sub: 1,
        health_gain: v,
        saving: v,
        cost_increase: 0.0,
        effort: 0.5,
        portion_shift_pct: 10.0,
        within_category: within,
        adds_mixed_dish: mixed,
    };
    let pool = [with_v("within", 9.0, true, false), with_v("cross", 11.0, false, true)];
    let w = select_winner(&pool, &p).context("no winner")?.0;
    ensure!(w.candidate_id == "within", "mixed-dish cross at 11 beat within at 9");
    let pool = [with_v("within", 9.0, true, false), with_v("cross", 11.0, false, false)];
    let w = select_winner(&pool, &p).context("no winner")?.0;
    ensure!(w.candidate_id == "cross", "non-mixed cross at 11 lost to within at 9");
    let mut a = with_v("five", 9.0, true, false);
    let mut b = with_v("eight", 9.0, true, false);
    a.portion_shift_pct = 5.0;
    b.portion_shift_pct = 8.0;
    let pool = [b, a];
    let w = select_winner(&pool, &p).context("no winner")?.0;
    ensure!(w.candidate_id == "five", "tie not broken by smaller portion shift");
    Ok("mixed-dish margin, 20% uplift and portion-shift tie break".into())
}

#[derive(Deserialize)]
struct PortionedMeal {
    meal_id: String,
    meal_type: MealType,
    items: Vec<MealItem>,
}

#[derive(Deserialize)]
struct Overall {
    median_generated: f64,
    median_real: f64,
    reduction_pct: f64,
    n_generated: usize,
    n_real: usize,
}

#[derive(Deserialize)]
struct Summary {
    overall: Overall,
}

fn pipeline_feasibility(cfg: &PipelineConfig, out: &Path) -> Result<String> {
    let table = FoodTable::new(read_foods(out.join(names::FOODS_PROTO))?)?;
    let meals: Vec<PortionedMeal> = serde_json::from_slice(&std::fs::read(out.join(names::PORTIONED_MEALS))?)?;
    ensure!(!meals.is_empty(), "no portioned meals");
    let pc = &cfg.portion;
    for m in &meals {
        let foods: Vec<&FoodRecord> = m.items.iter().map(|i| table.get(&i.food_code)).collect::<platewise::Result<_>>()?;
        let x: Vec<f64> = m.items.iter().map(|i| i.grams).collect();
        let energy = pc.plan.energy_target(m.meal_type, pc.profile.reference_energy);
        let kcal: f64 = x.iter().zip(&foods).map(|(g, f)| g * f.energy_per_gram()).sum();
        ensure!(close(kcal, energy, 0.01 * energy), "{}: {kcal:.2} kcal vs target {energy}", m.meal_id);
        ensure!(oracles::feasible(&x, &foods, m.meal_type, energy, &pc.constraints, 1e-6), "{} violates a cap", m.meal_id);
        let solids = foods.iter().filter(|f| f.counts_as_solid()).count();
        ensure!(solids >= pc.constraints.min_solids(m.meal_type), "{}: {solids} solid items", m.meal_id);
    }
    Ok(format!("{} pipeline meals", meals.len()))
}

fn frontier_nesting(cfg: &PipelineConfig, out: &Path) -> Result<String> {
    let file = read_candidates(&out.join(names::CANDIDATES))?;
    ensure!(file.k_max >= 3, "candidates cover only k <= {}", file.k_max);
    let mut best: Vec<Vec<Vec<f64>>> = Vec::new();
    for k in 1..=3 {
        best.push(sweep_theta(&file.pools(k), k, &cfg.sweep)?.best_pooled_v);
    }
    let mut checks = 0;
    for k in 1..3 {
        for (ti, (lo, hi)) in best[k - 1].iter().zip(&best[k]).enumerate() {
            for (mi, (a, b)) in lo.iter().zip(hi).enumerate() {
                ensure!(b >= a, "theta {} meal {mi}: best V {a} at k={k} but {b} at k={}", cfg.sweep.theta_grid[ti], k + 1);
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} (theta, meal) comparisons over k 1->2->3, 0 violations"))
}

fn files_under(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root)?.to_path_buf(), std::fs::read(&path)?);
            }
        }
    }
    Ok(out)
}

fn determinism(a: &Path, b: &Path) -> Result<String> {
    let (fa, fb) = (files_under(a)?, files_under(b)?);
    ensure!(fa.keys().eq(fb.keys()), "artifact sets differ");
    let differing: Vec<String> = fa.iter().filter(|(k, v)| fb[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure!(differing.is_empty(), "differing artifacts: {}", differing.join(", "));
    Ok(format!("{} files byte-identical across 1 and 4 worker threads", fa.len()))
}

fn main() {
    let mut gate = Gate { failures: 0 };

    gate.check("metric fixtures", metric_fixtures);

    let oracle = run_portioner_oracle();
    match &oracle {
        Ok(run) => {
            gate.check("portioner oracle", || {
                ensure!(run.beaten.is_empty(), "{}", run.beaten.join("; "));
                ensure!(run.mean_solve < 1.0, "mean solve {:.3} s", run.mean_solve);
                Ok(format!(
                    "{ORACLE_INSTANCES}/{ORACLE_INSTANCES} at or below best of {ORACLE_SAMPLES} random samples \
                     (worst gap {:.3e}), mean solve {:.4} s",
                    run.worst_gap, run.mean_solve
                ))
            });
        }
        Err(e) => gate.check("portioner oracle", || Err(anyhow::anyhow!("{e:#}"))),
    }

    gate.check("lof equivalence", lof_equivalence);
    gate.check("bh-fdr and hurdle enumeration", bh_and_hurdle);
    gate.check("substitution monotonicity", substitution_monotonicity);
    gate.check("winner rule examples", winner_examples);

    let tmp = tempfile::tempdir().expect("temp dir");
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).expect("data dir");
    let pipeline = (|| -> Result<(PipelineConfig, f64)> {
        let cfg_path = write_synthetic(&data, &SynthConfig::default())?;
        let cfg = PipelineConfig::load(&cfg_path)?;
        let t0 = Instant::now();
        run_all(&cfg, &tmp.path().join("run-a"))?;
        Ok((cfg, t0.elapsed().as_secs_f64()))
    })();

    gate.check("portioner feasibility", || {
        let run = oracle.as_ref().map_err(|e| anyhow::anyhow!("oracle run failed: {e:#}"))?;
        ensure!(run.infeasible.is_empty(), "{}", run.infeasible.join("; "));
        let (cfg, _) = pipeline.as_ref().map_err(|e| anyhow::anyhow!("pipeline failed: {e:#}"))?;
        let detail = pipeline_feasibility(cfg, &tmp.path().join("run-a"))?;
        Ok(format!("{ORACLE_INSTANCES} oracle instances and {detail} within caps and +-1% energy"))
    });

    gate.check("end-to-end gate", || {
        let (_, secs) = pipeline.as_ref().map_err(|e| anyhow::anyhow!("pipeline failed: {e:#}"))?;
        let text = std::fs::read(tmp.path().join("run-a").join(names::EVALUATION_SUMMARY))?;
        let s: Summary = serde_json::from_slice(&text)?;
        let o = &s.overall;
        ensure!(o.reduction_pct >= 30.0, "median rdi_deviation only {:.2}% lower", o.reduction_pct);
        ensure!(*secs < 300.0, "pipeline took {secs:.1} s");
        Ok(format!(
            "median rdi_deviation {:.2} generated (n={}) vs {:.2} real (n={}), {:.2}% lower, {secs:.1} s",
            o.median_generated, o.n_generated, o.median_real, o.n_real, o.reduction_pct
        ))
    });

    gate.check("frontier nesting", || {
        let (cfg, _) = pipeline.as_ref().map_err(|e| anyhow::anyhow!("pipeline failed: {e:#}"))?;
        frontier_nesting(cfg, &tmp.path().join("run-a"))
    });

    gate.check("determinism", || {
        let (cfg, _) = pipeline.as_ref().map_err(|e| anyhow::anyhow!("pipeline failed: {e:#}"))?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build()?;
        pool.install(|| run_all(cfg, &tmp.path().join("run-b")))?;
        determinism(&tmp.path().join("run-a"), &tmp.path().join("run-b"))
    });

    if gate.failures > 0 {
        println!("{} acceptance criteria failed", gate.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
