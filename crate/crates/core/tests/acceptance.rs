//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
//! and the binary exits non-zero if any of them fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use adoption_paths::archetypes::{full_archetype_region, intended_path, TWELVE};
use adoption_paths::ati::{
    compute_ati, compute_auc, compute_region_ati, find_intersections, DEFAULT_QUAD_TOL,
};
use adoption_paths::curvefit::{fit_family, select_best_curve, Curve, CurveFamily, FitOptions};
use adoption_paths::dataset::RegionDataset;
use adoption_paths::features::Trajectory;
use adoption_paths::features::{extract_features, select_entry_threshold, THRESHOLD_CANDIDATES};
use adoption_paths::pipeline::{run_pipeline, RunConfig};
use adoption_paths::stats::{wilcoxon_signed_rank, WilcoxonOutcome};
use adoption_paths::transitions::{
    analyse_transitions, magnitude_distribution, path_median_curves, transition_matrix,
    TransitionRecord,
};
use adoption_paths::typology::{
    assign_tiers, classify, classify_region, is_feasible, path_frequencies, AdoptionProfile,
    EntryTier, Path, RuleId, Tier,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn quad(c: f64, b: f64, domain: (f64, f64)) -> Curve {
    Curve::polynomial(vec![0.0, b, c], domain).unwrap()
}

fn random_sigmoid(rng: &mut ChaCha8Rng, span: f64) -> Curve {
    let k = rng.random_range(20.0..200.0);
    let (family, params) = match rng.random_range(0..5) {
        0 => (
            CurveFamily::Logistic,
            vec![
                k,
                rng.random_range(0.3..2.0),
                rng.random_range(0.2..0.8) * span,
            ],
        ),
        1 => (
            CurveFamily::Gompertz,
            vec![k, rng.random_range(1.0..10.0), rng.random_range(0.1..0.8)],
        ),
        2 => (
            CurveFamily::Bass,
            vec![k, rng.random_range(0.005..0.05), rng.random_range(0.2..0.8)],
        ),
        3 => (
            CurveFamily::CumulativeNormal,
            vec![
                k,
                rng.random_range(0.2..0.8) * span,
                rng.random_range(1.0..4.0),
            ],
        ),
        _ => (
            CurveFamily::GeneralizedRichards,
            vec![
                k,
                rng.random_range(0.3..2.0),
                rng.random_range(0.2..0.8) * span,
                rng.random_range(0.3..3.0),
            ],
        ),
    };
    Curve::new(family, params, (0.0, span)).unwrap()
}

fn with_k(curve: &Curve, factor: f64) -> Curve {
    let mut p = curve.params().to_vec();
    p[0] *= factor;
    Curve::new(curve.family(), p, curve.domain()).unwrap()
}

fn ac1() -> Check {
    let start = Instant::now();
    let d = (0.0, 10.0);
    let penalty = compute_ati(
        &quad(0.2, 0.0, d),
        &quad(0.0, 1.0, d),
        50.0,
        DEFAULT_QUAD_TOL,
    )
    .map_err(|e| e.to_string())?;
    let reward = compute_ati(
        &quad(0.25, 0.0, d),
        &quad(0.0, 2.0, d),
        100.0,
        DEFAULT_QUAD_TOL,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure((penalty.ati - 350.0 / 3.0).abs() < 1e-6, || {
        format!("penalty ATI {}", penalty.ati)
    })?;
    ensure((reward.ati - 260.0 / 3.0).abs() < 1e-6, || {
        format!("reward ATI {}", reward.ati)
    })?;
    ensure(elapsed < 1.0, || format!("took {elapsed} s"))?;
    Ok(format!(
        "penalty {:.6}, reward {:.6}, {elapsed:.3} s",
        penalty.ati, reward.ati
    ))
}

fn ac2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..200 {
        let span = rng.random_range(5.0..20.0);
        let c_m = random_sigmoid(&mut rng, span);
        let factor = if rng.random_bool(0.5) {
            rng.random_range(0.2..0.95)
        } else {
            rng.random_range(1.05..4.0)
        };
        let c_i = with_k(&c_m, factor);
        let a_m = compute_auc(&c_m, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
        let r = compute_ati(&c_i, &c_m, a_m, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
        ensure(r.intersections.is_empty(), || {
            format!("case {case}: spurious crossing")
        })?;
        ensure(r.ati.to_bits() == r.a_norm.to_bits(), || {
            format!("case {case}: ATI {} vs normalised area {}", r.ati, r.a_norm)
        })?;
    }
    Ok("200/200 pairs with ATI equal to the normalised area".into())
}

fn ac3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut crossings = 0;
    for region in 0..500 {
        let span = rng.random_range(5.0..20.0);
        let c_m = random_sigmoid(&mut rng, span);
        let a_m = compute_auc(&c_m, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
        for _ in 0..rng.random_range(3..9) {
            let c_i = random_sigmoid(&mut rng, span);
            let r = compute_ati(&c_i, &c_m, a_m, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
            crossings += r.intersections.len();
            let (d_ati, d_norm) = (r.ati - 100.0, r.a_norm - 100.0);
            ensure(d_ati.signum() == d_norm.signum() || d_ati == 0.0, || {
                format!(
                    "region {region}: ATI {} crosses 100 from {}",
                    r.ati, r.a_norm
                )
            })?;
            ensure(d_ati.abs() <= d_norm.abs(), || {
                format!(
                    "region {region}: ATI {} further from 100 than {}",
                    r.ati, r.a_norm
                )
            })?;
        }
    }
    Ok(format!("500 regions, {crossings} crossings, no violations"))
}

fn quadratic_region() -> RegionDataset {
    let csv = "entity_id,time,value\n".to_string()
        + &(0..=10)
            .flat_map(|t| {
                let t = t as f64;
                [
                    format!("e1,{t},{}\n", 0.2 * t * t),
                    format!("e2,{t},{}\n", 2.0 * t - 0.2 * t * t),
                    format!("e3,{t},{}\n", 1.5 * t),
                    format!("e4,{t},{}\n", 0.5 * t),
                ]
            })
            .collect::<String>();
    adoption_paths::dataset::load_region(csv.as_bytes()).unwrap()
}

fn twelve_region() -> RegionDataset {
    adoption_paths::archetypes::archetype_region(&TWELVE).unwrap()
}

fn ac4() -> Check {
    let fixtures = [
        ("quadratic", quadratic_region()),
        ("archetypes", full_archetype_region().unwrap()),
        ("twelve", twelve_region()),
    ];
    let mut worst: f64 = 0.0;
    for (name, ds) in &fixtures {
        let region = compute_region_ati(ds, &FitOptions::default(), DEFAULT_QUAD_TOL)
            .map_err(|e| e.to_string())?;
        let c_m = &region.mean_fit.curve;
        let r = compute_ati(c_m, c_m, region.a_m, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
        let err = (r.a_norm - 100.0).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || {
            format!("{name}: mean normalised area {}", r.a_norm)
        })?;
    }
    Ok(format!(
        "{} fixtures, worst deviation {worst:.1e}",
        fixtures.len()
    ))
}

fn ac5() -> Check {
    let ds = full_archetype_region().map_err(|e| e.to_string())?;
    let region = compute_region_ati(&ds, &FitOptions::default(), DEFAULT_QUAD_TOL)
        .map_err(|e| e.to_string())?;
    let results: Vec<_> = region.entities.iter().map(|e| e.result.clone()).collect();
    let threshold =
        select_entry_threshold(&ds, &THRESHOLD_CANDIDATES).map_err(|e| e.to_string())?;
    let features =
        extract_features(&ds, &results, threshold.fraction).map_err(|e| e.to_string())?;
    let classes = classify_region(&features);
    let mut recovered = [false; 8];
    for class in &classes {
        let want = intended_path(&class.entity_id).ok_or("unnamed member")?;
        ensure(class.path() == Some(want), || {
            format!("{} classified as {:?}", class.entity_id, class.path())
        })?;
        recovered[want.tier_order() as usize] = true;
    }
    ensure(recovered.iter().all(|r| *r), || {
        "a path has no members".into()
    })?;

    let medians = path_median_curves(&ds, &classes);
    let last = ds.axis().len() - 1;
    let mut by_median: Vec<Path> = medians.iter().map(|(p, _)| *p).collect();
    by_median.sort_by(|a, b| {
        let va = medians.iter().find(|(p, _)| p == a).unwrap().1[last];
        let vb = medians.iter().find(|(p, _)| p == b).unwrap().1[last];
        va.total_cmp(&vb)
    });
    let t_last = ds.axis().last();
    let mut by_design = by_median.clone();
    by_design.sort_by(|a, b| {
        adoption_paths::archetypes::archetype_value(*a, t_last)
            .total_cmp(&adoption_paths::archetypes::archetype_value(*b, t_last))
    });
    ensure(by_median == by_design, || {
        format!("median order {by_median:?} vs {by_design:?}")
    })?;
    Ok(format!(
        "8/8 paths, {}/{} members, threshold {}",
        classes.len(),
        classes.len(),
        threshold.fraction
    ))
}

fn trapezoid(curve: &Curve, n: usize) -> f64 {
    let (a, b) = curve.domain();
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| curve.value(a + h * k as f64)).sum();
    h * (inner + 0.5 * (curve.value(a) + curve.value(b)))
}

fn dense_roots(c_i: &Curve, c_m: &Curve, n: usize) -> Vec<f64> {
    let (a, b) = c_m.domain();
    let span = b - a;
    let g = |t: f64| c_i.value(t) - c_m.value(t);
    let mut roots = Vec::new();
    let (mut t0, mut g0) = (a, g(a));
    for k in 1..=n {
        let t1 = a + span * k as f64 / n as f64;
        let g1 = g(t1);
        if g1 == 0.0 {
            continue;
        }
        if g0 != 0.0 && g0.signum() != g1.signum() {
            let root = t0 + (t1 - t0) * g0 / (g0 - g1);
            if root - a > 1e-6 * span && b - root > 1e-6 * span {
                roots.push(root);
            }
        }
        (t0, g0) = (t1, g1);
    }
    roots
}

fn ac6() -> Check {
    let d = (0.0, 10.0);
    let curves = [
        Curve::new(CurveFamily::Logistic, vec![100.0, 0.8, 5.0], d),
        Curve::new(CurveFamily::Gompertz, vec![100.0, 5.0, 0.5], d),
        Curve::new(CurveFamily::Bass, vec![100.0, 0.02, 0.5], d),
        Curve::new(
            CurveFamily::GeneralizedRichards,
            vec![100.0, 0.8, 5.0, 0.5],
            d,
        ),
        Curve::new(CurveFamily::CumulativeNormal, vec![100.0, 5.0, 2.0], d),
        Curve::new(CurveFamily::Exponential, vec![2.0, 0.3], d),
        Curve::new(CurveFamily::Bertalanffy, vec![100.0, 0.3, -1.0], d),
        Curve::polynomial(vec![1.0, 2.0, -0.3, 0.02], d),
        Curve::new(CurveFamily::Linear, vec![1.0, 2.0], d),
    ];
    let mut worst: f64 = 0.0;
    for curve in curves {
        let curve = curve.map_err(|e| e.to_string())?;
        let auc = compute_auc(&curve, DEFAULT_QUAD_TOL).map_err(|e| e.to_string())?;
        let reference = trapezoid(&curve, 100_000);
        let rel = ((auc - reference) / reference).abs();
        worst = worst.max(rel);
        ensure(rel <= 1e-6, || {
            format!("{}: {auc} vs {reference}", curve.family())
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut total = 0;
    for pair in 0..100 {
        let span = 10.0;
        let c_m = random_sigmoid(&mut rng, span);
        let c_i = random_sigmoid(&mut rng, span);
        let found: Vec<f64> = find_intersections(&c_i, &c_m).iter().map(|x| x.t).collect();
        let dense = dense_roots(&c_i, &c_m, 1_000_000);
        ensure(found.len() == dense.len(), || {
            format!(
                "pair {pair}: {} roots vs {} by dense scan",
                found.len(),
                dense.len()
            )
        })?;
        for (x, y) in found.iter().zip(&dense) {
            ensure((x - y).abs() <= 1e-6 * span, || {
                format!("pair {pair}: root {x} vs {y}")
            })?;
        }
        total += found.len();
    }
    Ok(format!(
        "9 families, worst area error {worst:.1e}; {total} roots on 100 pairs"
    ))
}

fn ac7() -> Check {
    let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
    let d = (0.0, 10.0);
    let options = FitOptions::default();
    let generators = [
        (CurveFamily::Logistic, vec![100.0, 0.8, 5.0]),
        (CurveFamily::Gompertz, vec![100.0, 5.0, 0.5]),
        (CurveFamily::Bass, vec![100.0, 0.02, 0.5]),
        (CurveFamily::GeneralizedRichards, vec![100.0, 0.8, 5.0, 0.5]),
        (CurveFamily::CumulativeNormal, vec![100.0, 5.0, 2.0]),
        (CurveFamily::Exponential, vec![2.0, 0.3]),
        (CurveFamily::Bertalanffy, vec![100.0, 0.3, -1.0]),
        (CurveFamily::Polynomial(2), vec![1.0, 2.0, 0.3]),
        (CurveFamily::Polynomial(3), vec![1.0, 2.0, -0.3, 0.02]),
        (CurveFamily::Linear, vec![1.0, 2.0]),
    ];
    let mut worst: f64 = 1.0;
    for (family, params) in generators {
        let curve = Curve::new(family, params, d).map_err(|e| e.to_string())?;
        let values: Vec<f64> = times.iter().map(|&t| curve.value(t)).collect();
        let fit =
            fit_family(&times, &values, family, &options).map_err(|e| format!("{family}: {e}"))?;
        worst = worst.min(fit.r2);
        ensure(fit.r2 >= 1.0 - 1e-9, || format!("{family}: r2 {}", fit.r2))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let gompertz = Curve::new(CurveFamily::Gompertz, vec![100.0, 5.0, 0.5], d).unwrap();
    let noisy: Vec<f64> = times
        .iter()
        .map(|&t| {
            let e: f64 = rng.sample(StandardNormal);
            gompertz.value(t) * (1.0 + 0.01 * e)
        })
        .collect();
    let best = select_best_curve(&times, &noisy, &options).map_err(|e| e.to_string())?;
    ensure(best.family().is_sigmoid(), || {
        format!("noisy data selected {}", best.family())
    })?;
    ensure(best.r2_adjusted > 0.99, || {
        format!("adjusted r2 {}", best.r2_adjusted)
    })?;
    Ok(format!(
        "10 generators, worst r2 1-{:.1e}; noisy data selected {} (adjusted r2 {:.5})",
        1.0 - worst,
        best.family(),
        best.r2_adjusted
    ))
}

/// Rows of the criteria table written out independently of the classifier.
fn table_row(p: &AdoptionProfile) -> Option<Path> {
    use EntryTier::{Early, Late, Middle};
    use Tier::*;
    use Trajectory::{Downhill, Stable, Uphill};
    type Row = (
        Path,
        &'static [Tier],
        &'static [EntryTier],
        &'static [Trajectory],
        &'static [Tier],
    );
    let rows: [Row; 8] = [
        (
            Path::NonAdopting,
            &[Zero],
            &[EntryTier::Null],
            &[Trajectory::Null],
            &[Zero],
        ),
        (Path::Leading, &[High], &[Early], &[Stable], &[High]),
        (Path::Accelerating, &[High], &[Early], &[Uphill], &[High]),
        (
            Path::Decelerating,
            &[High],
            &[Early],
            &[Downhill],
            &[Medium, Low],
        ),
        (Path::Leaping, &[Low, Medium], &[Late], &[Uphill], &[High]),
        (
            Path::Moderate,
            &[Medium],
            &[Early, Middle],
            &[Stable, Uphill],
            &[Medium],
        ),
        (
            Path::DecliningModerate,
            &[Medium],
            &[Early, Middle],
            &[Downhill],
            &[Low],
        ),
        (
            Path::Lagging,
            &[Low],
            &[Early, Middle, Late],
            &[Stable, Downhill],
            &[Low],
        ),
    ];
    rows.iter()
        .find(|(_, a, e, t, l)| {
            a.contains(&p.ati)
                && e.contains(&p.entry)
                && t.contains(&p.trajectory)
                && l.contains(&p.lai)
        })
        .map(|r| r.0)
}

fn ac8() -> Check {
    let (mut feasible, mut matched) = (0, 0);
    for profile in AdoptionProfile::all() {
        let result = classify(&profile);
        ensure(result.is_ok() == is_feasible(&profile), || {
            format!("{profile}: classify and feasibility disagree")
        })?;
        let Ok(assignment) = result else { continue };
        feasible += 1;
        if let Some(path) = table_row(&profile) {
            matched += 1;
            ensure(
                assignment.path == path && assignment.rule == RuleId::Row(path),
                || format!("{profile}: {:?} instead of row {path}", assignment),
            )?;
        }
    }
    use EntryTier::{Early, Late};
    use Trajectory::{Downhill, Uphill};
    let rejected = [
        AdoptionProfile::new(Tier::High, Late, Downhill, Tier::Low),
        AdoptionProfile::new(Tier::Low, Late, Downhill, Tier::High),
        AdoptionProfile::new(Tier::High, Early, Uphill, Tier::Low),
    ];
    for p in rejected {
        ensure(classify(&p).is_err(), || format!("{p} was accepted"))?;
    }
    Ok(format!(
        "256 profiles, {feasible} feasible, {matched} match a table row"
    ))
}

fn ac9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
    let tiers = assign_tiers(&values, &vec![false; values.len()]);
    let share = tiers.iter().filter(|t| **t == Tier::Medium).count() as f64 / values.len() as f64;
    ensure((share - 0.34).abs() <= 0.02, || {
        format!("medium share {share}")
    })?;
    Ok(format!("medium share {share:.4}"))
}

/// Two-sided p-value by listing every sign assignment.
fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(x, _)| **x > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w = w_plus.min(total - w_plus);
    let n = d.len();
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let s: f64 = (0..n)
                .filter(|k| mask >> k & 1 == 1)
                .map(|k| ranks[k])
                .sum();
            s <= w + 1e-9
        })
        .count();
    (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
}

fn ac10() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cases = 0;
    for n in 5..=10 {
        for round in 0..20 {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64).collect();
            let b: Vec<f64> = (0..n)
                .map(|_| {
                    if round % 2 == 0 {
                        rng.random_range(0..12) as f64
                    } else {
                        rng.random_range(0.0..12.0)
                    }
                })
                .collect();
            let nonzero = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            if nonzero < 5 {
                continue;
            }
            let WilcoxonOutcome::Test(t) =
                wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())?
            else {
                return Err("unexpected all-tied outcome".into());
            };
            let want = brute_force_p(&a, &b);
            ensure((t.p_value - want).abs() <= 1e-9, || {
                format!("n={n}: p {} vs enumeration {want}", t.p_value)
            })?;
            cases += 1;
        }
    }
    let a = [3.0, 5.0, 7.0, 9.0, 11.0, 13.0];
    let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let WilcoxonOutcome::Test(t) = wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())? else {
        return Err("unexpected all-tied outcome".into());
    };
    ensure((t.p_value - 0.03125).abs() <= 1e-12, || {
        format!("all-positive p {}", t.p_value)
    })?;
    Ok(format!(
        "{cases} cases match enumeration, all-positive p {}",
        t.p_value
    ))
}

fn ac11() -> Check {
    let mut designed = [[0usize; 8]; 8];
    let mut records = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (i, &from) in Path::ALL.iter().enumerate() {
        for (j, &to) in Path::ALL.iter().enumerate() {
            let count = rng.random_range(0..4);
            designed[i][j] = count;
            for k in 0..count {
                records.push(TransitionRecord::new(format!("{from}-{to}-{k}"), from, to));
            }
        }
    }
    let matrix = transition_matrix(&records);
    ensure(matrix.counts == designed, || {
        "matrix differs from the design".into()
    })?;
    for r in &records {
        let want = r.second.tier_order() as i8 - r.first.tier_order() as i8;
        ensure(r.magnitude == want, || {
            format!("{}: magnitude {}", r.entity_id, r.magnitude)
        })?;
    }
    let drop = TransitionRecord::new("x", Path::Leading, Path::DecliningModerate);
    ensure(drop.magnitude == -5, || {
        format!("leading to declining moderate {}", drop.magnitude)
    })?;
    let dist = magnitude_distribution(&records);
    let expected: usize = records.iter().filter(|r| r.magnitude == 2).count();
    ensure(dist.count(2) == expected, || "magnitude histogram".into())?;

    let ds = full_archetype_region().map_err(|e| e.to_string())?;
    let region = compute_region_ati(&ds, &FitOptions::default(), DEFAULT_QUAD_TOL)
        .map_err(|e| e.to_string())?;
    let results: Vec<_> = region.entities.iter().map(|e| e.result.clone()).collect();
    let features = extract_features(&ds, &results, 0.3).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for split in [ds.axis().midpoint(), 4.5] {
        let analysis = analyse_transitions(&ds, &region, &features, split, DEFAULT_QUAD_TOL)
            .map_err(|e| e.to_string())?;
        let [h1, h2] = &analysis.split.halves;
        let rel = |parts: f64, whole: f64| ((parts - whole) / whole).abs();
        worst = worst.max(rel(h1.a_m + h2.a_m, region.a_m));
        for (k, e) in region.entities.iter().enumerate() {
            if e.result.a_i > 0.0 {
                worst = worst.max(rel(h1.results[k].a_i + h2.results[k].a_i, e.result.a_i));
            }
        }
        let m = transition_matrix(&analysis.records);
        let (f1, _) = path_frequencies(&analysis.classes[0]);
        let (f2, _) = path_frequencies(&analysis.classes[1]);
        if analysis.records.len() == ds.len() {
            ensure(m.row_totals() == f1 && m.column_totals() == f2, || {
                "matrix marginals differ from half frequencies".into()
            })?;
        }
    }
    ensure(worst <= 1e-9, || format!("half areas off by {worst:.1e}"))?;
    Ok(format!(
        "{} designed transitions, area additivity {worst:.1e}",
        records.len()
    ))
}

fn ac12() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("twelve.csv");
    let mut bytes = Vec::new();
    twelve_region()
        .write_csv(&mut bytes)
        .map_err(|e| e.to_string())?;
    std::fs::write(&input, bytes).map_err(|e| e.to_string())?;
    let outs = [dir.path().join("a"), dir.path().join("b")];
    for out in &outs {
        run_pipeline(&RunConfig::new(&input, out)).map_err(|e| e.to_string())?;
    }
    let mut names: Vec<_> = std::fs::read_dir(&outs[0])
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let other = std::fs::read_dir(&outs[1])
        .map_err(|e| e.to_string())?
        .count();
    ensure(names.len() == other, || {
        "bundles hold different files".into()
    })?;
    for name in &names {
        let a = std::fs::read(outs[0].join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(outs[1].join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{} differs", name.to_string_lossy()))?;
    }
    Ok(format!("{} files identical", names.len()))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 12] = [
        ("ATI hand oracle", ac1),
        ("no-intersection identity", ac2),
        ("side preservation", ac3),
        ("regional self-normalisation", ac4),
        ("archetype recovery", ac5),
        ("quadrature and intersection oracle", ac6),
        ("curve selection", ac7),
        ("typology totality and fidelity", ac8),
        ("tier band mass", ac9),
        ("Wilcoxon exact enumeration", ac10),
        ("transition mechanics", ac11),
        ("determinism", ac12),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
