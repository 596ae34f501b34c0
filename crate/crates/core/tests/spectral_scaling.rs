mod common;

use common::c;
use ews_core::spectral::*;

/// Block 1 sits at `p` with chain length `m1`; block 2 is a fixed simple mode.
fn family(p: f64, m1: usize) -> SpectralModel {
    let n = m1 + 1;
    let v: Vec<Complex> = (0..n).map(|a| c(1.0 + 0.3 * a as f64, 0.2 * a as f64)).collect();
    let g = CouplingMatrix::from_fn(n, |a, b| v[a] * v[b].conj() + if a == b { c(0.5, 0.0) } else { c(0.0, 0.0) });
    let blocks = vec![
        JordanBlockSpec { eigenvalue: c(p, 0.0), multiplicity: m1 },
        JordanBlockSpec::simple(c(-1.5, 0.7)),
    ];
    SpectralModel::new(p, 0.0, blocks, 1.0, g).unwrap()
}

type Complex = ews_core::Complex64;

fn fitted_exponent(m1: usize, k1: usize, k2: usize) -> f64 {
    let ps: Vec<f64> = (0..9).map(|e| -(10f64).powf(-2.0 - 0.25 * e as f64)).collect();
    let samples: Vec<(f64, f64)> = ps
        .iter()
        .map(|&p| (p, autocov_jordan(1, k1, 1, k2, 0.0, &family(p, m1)).unwrap().norm()))
        .collect();
    fit_scaling_exponent(&samples, |p| -p).unwrap().exponent
}

#[test]
fn simple_eigenvalue_diverges_like_inverse_rate() {
    let e = fitted_exponent(1, 1, 1);
    assert!((e - predicted_exponent_pair(1, 1) as f64).abs() < 0.05, "exponent {e}");
}

#[test]
fn chain_of_two_mixed_slots() {
    let e = fitted_exponent(2, 2, 1);
    assert!((e + 2.0).abs() < 0.05, "exponent {e}");
    let e = fitted_exponent(2, 1, 2);
    assert!((e + 2.0).abs() < 0.05, "exponent {e}");
}

#[test]
fn chain_of_two_top_slot_gives_minus_three() {
    let e = fitted_exponent(2, 2, 2);
    assert!((e - (-2.0 * 2.0 + 1.0)).abs() < 0.05, "exponent {e}");
}

#[test]
fn generic_direction_is_dominated_by_top_slot() {
    let f = DirectionCoeffs::unit(1, 1).with(2, 1, c(0.4, -0.1));
    // The added slot-(1,2) weight is δ/4, so the top term only dominates once |p| ≪ δ/4.
    let ps: Vec<f64> = (0..9).map(|e| -(10f64).powf(-7.0 - 0.25 * e as f64)).collect();
    let m = family(-0.1, 2);
    let dense = densify_direction(&f, 1e-2, &[1.0; 3], &m).unwrap();
    let predicted = predicted_exponent_directions(&dense, &dense, &m).unwrap();
    assert_eq!(predicted, -3);
    let samples: Vec<(f64, f64)> =
        ps.iter().map(|&p| (p, autocov_subspace(&dense, &dense, 0.0, &family(p, 2)).unwrap().norm())).collect();
    let e = fit_scaling_exponent(&samples, |p| -p).unwrap().exponent;
    assert!((e - predicted as f64).abs() < 0.05, "exponent {e}");
}

#[test]
fn direction_without_block_one_stays_bounded() {
    let f = DirectionCoeffs::unit(2, 1);
    let a = autocov_subspace(&f, &f, 0.0, &family(-1e-2, 1)).unwrap();
    let b = autocov_subspace(&f, &f, 0.0, &family(-1e-6, 1)).unwrap();
    assert!((a - b).norm() < 1e-12 * a.norm());
}

#[test]
fn normalized_autocorrelation_approaches_leading_exponential() {
    let p = -1e-4;
    let m = family(p, 1);
    let f = DirectionCoeffs::unit(1, 1).with(2, 1, c(1.0, 0.0));
    let x0 = autocov_subspace(&f, &f, 0.0, &m).unwrap();
    for tau in [0.5, 2.0, 10.0] {
        let r = autocov_subspace(&f, &f, tau, &m).unwrap() / x0;
        let want = autocorr_asymptotic(1, tau, &m).unwrap();
        assert!((r - want).norm() < 1e-3, "tau {tau}: {r} vs {want}");
    }
}
