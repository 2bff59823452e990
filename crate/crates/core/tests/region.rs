//! Region-level index results on fixtures with closed-form answers.

use adoption_paths::ati::{compute_region_ati, DEFAULT_QUAD_TOL};
use adoption_paths::curvefit::{CurveFamily, FitOptions};
use adoption_paths::dataset::load_region;

fn quadratic_csv() -> String {
    let mut csv = String::from("entity_id,time,value\n");
    for t in 0..=10 {
        let t = t as f64;
        csv += &format!("e1,{t},{}\n", 0.2 * t * t);
        csv += &format!("e2,{t},{}\n", 2.0 * t - 0.2 * t * t);
        csv += &format!("e3,{t},{}\n", 1.5 * t);
        csv += &format!("e4,{t},{}\n", 0.5 * t);
    }
    csv
}

#[test]
fn four_entity_region_matches_closed_form() {
    let ds = load_region(quadratic_csv().as_bytes()).unwrap();
    let region = compute_region_ati(&ds, &FitOptions::default(), DEFAULT_QUAD_TOL).unwrap();
    assert_eq!(region.mean_fit.family(), CurveFamily::Linear);
    assert!((region.a_m - 50.0).abs() < 1e-9);
    let expected = [350.0 / 3.0, 250.0 / 3.0, 150.0, 50.0];
    for (e, want) in region.entities.iter().zip(expected) {
        println!("{} {} {}", e.entity_id, e.fit.family(), e.result.ati);
        assert!(
            (e.result.ati - want).abs() < 1e-6,
            "{}: {}",
            e.entity_id,
            e.result.ati
        );
    }
}
