//! The inefficient-detector waiting time against simulated records, and its
//! behaviour across drive strengths.

use rabi_core::estimator::simulate_shared_records;
use rabi_core::wtd::{ideal_wtd_curve, inefficient_wtd, uniform_grid};
use rabi_core::SystemParams;

#[test]
fn matches_thinned_record_histogram() {
    let (omega, eta) = (5.0, 0.7);
    let n = 100_000;
    let rate = eta * SystemParams::with_omega(omega).steady_state_flux();
    let recs = simulate_shared_records(&SystemParams::with_omega(omega), eta, None, 1.1 * n as f64 / rate, 1e-3, 21, 0).unwrap();
    let waits: Vec<f64> = recs.absorptions.waiting_times().into_iter().take(n).collect();
    assert_eq!(waits.len(), n);

    let (h, bins) = (0.2, 60);
    let mut counts = vec![0usize; bins];
    for w in &waits {
        if let Some(c) = counts.get_mut((w / h) as usize) {
            *c += 1;
        }
    }
    let step = 1e-3;
    let fine = uniform_grid(h * bins as f64, step);
    let curve = inefficient_wtd(omega, 1.0, eta, &fine).unwrap();
    let per_bin = (h / step).round() as usize;
    let mut worst: f64 = 0.0;
    for (b, c) in counts.iter().enumerate() {
        let seg = &curve.density[b * per_bin..=(b + 1) * per_bin];
        // trapezoid average of the curve over the bin
        let avg = (seg.iter().sum::<f64>() - 0.5 * (seg[0] + seg[per_bin])) / per_bin as f64;
        let mc = *c as f64 / (n as f64 * h);
        worst = worst.max((mc - avg).abs());
    }
    assert!(worst / curve.peak() < 0.03, "max deviation {:.4} of peak", worst / curve.peak());
}

#[test]
fn smearing_does_not_grow_with_drive() {
    let grid = uniform_grid(8.0, 1e-3);
    let contrast = |w: f64| inefficient_wtd(w, 1.0, 0.7, &grid).unwrap().first_contrast().unwrap();
    let c: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|&w| contrast(w)).collect();
    // structure survives at every drive, and larger Ω does not wash it out
    assert!(c.iter().all(|&x| x > 0.85 && x < 1.0), "{c:?}");
    assert!(c[1] >= c[0] && c[2] >= c[1], "{c:?}");
    // the ideal curve reaches zero; with η < 1 the troughs stay above it
    for w in [5.0, 10.0, 20.0] {
        assert!(ideal_wtd_curve(w, 1.0, &grid).first_contrast().unwrap() > 0.9999);
        let d = inefficient_wtd(w, 1.0, 0.7, &grid).unwrap();
        let troughs: Vec<f64> = (1..d.density.len() - 1)
            .filter(|&i| d.density[i] < d.density[i - 1] && d.density[i] <= d.density[i + 1])
            .map(|i| d.density[i])
            .collect();
        assert!(!troughs.is_empty() && troughs.iter().all(|&t| t > 0.0));
    }
}
