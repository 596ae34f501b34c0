use ews_core::boussinesq::*;
use ews_core::rng::rng_from_seed;
use rand::Rng;

fn small(params: &BoussinesqParams) -> (Grid2D, Discretization) {
    let g = build_grid(9, 19, params.length).unwrap();
    let d = Discretization::new(&g, params).unwrap();
    (g, d)
}

fn random_vec(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn th_state(d: &Discretization, g: &Grid2D) -> StateFields {
    let (s, rep) = relax(d, &StateFields::rest(g, &d.params), 1e-3, 5000, &NewtonOptions::default()).unwrap();
    assert!(rep.residual < 1e-8);
    s
}

#[test]
fn forcing_parity_and_zero_net_flux() {
    let l = 7.0;
    for k in 0..=20 {
        let x = l * k as f64 / 20.0;
        let (q, v, t) = forcing_profiles(x, l);
        let (qm, vm, tm) = forcing_profiles(l - x, l);
        assert!((q - qm).abs() < 1e-14 && (t - tm).abs() < 1e-14 && (v + vm).abs() < 1e-14);
    }
    let n = 4000;
    let h = l / n as f64;
    let integral: f64 = (0..n).map(|k| forcing_profiles((k as f64 + 0.5) * h, l).0 * h).sum();
    assert!(integral.abs() < 1e-10);
}

#[test]
fn grid_geometry() {
    let g = build_grid(19, 39, 5.0).unwrap();
    for i in 0..g.rows() {
        assert!((g.x1[i] + g.x1[g.m + 1 - i] + 1.0).abs() < 1e-14);
    }
    for j in 0..g.cols() - 1 {
        assert!((g.x2[j + 1] - g.x2[j] - 5.0 / 40.0).abs() < 1e-14);
    }
    let mid = g.h1(g.m / 2);
    assert!(g.h1(0) < mid && g.h1(g.m) < mid);
}

#[test]
fn laplacian_is_second_order_in_x2() {
    use std::f64::consts::PI;
    let l = 4.0;
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for n in [15usize, 31, 63] {
        let g = build_grid(5, n, l).unwrap();
        let ops = nonuniform_fd_ops(&g);
        let f: Vec<f64> = (0..g.n_nodes()).map(|k| (PI * g.x2[g.ij(k).1] / l).sin()).collect();
        let mut e: f64 = 0.0;
        for k in 0..g.n_nodes() {
            let (i, j) = g.ij(k);
            if g.is_interior(i, j) {
                let exact = -(PI / l).powi(2) * f[k];
                e = e.max((apply_stencil(&ops.lap[k], &f) - exact).abs());
            }
        }
        errs.push(e.log10());
        hs.push(g.h2().log10());
    }
    let slope = (errs[2] - errs[0]) / (hs[2] - hs[0]);
    assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn quadratic_is_differentiated_exactly_on_stretched_grid() {
    let g = build_grid(11, 7, 3.0).unwrap();
    let ops = nonuniform_fd_ops(&g);
    let f: Vec<f64> = (0..g.n_nodes()).map(|k| g.x1[g.ij(k).0].powi(2)).collect();
    for k in 0..g.n_nodes() {
        let (i, j) = g.ij(k);
        if g.is_interior(i, j) {
            let x = g.x1[i];
            assert!((apply_stencil(&ops.d1[k], &f) - 2.0 * x).abs() < 1e-10);
            assert!((apply_stencil(&ops.d11[k], &f) - 2.0).abs() < 1e-9);
        }
    }
}

#[test]
fn motionless_salt_free_state_has_zero_salt_residual() {
    let params = BoussinesqParams::regime1(0.0);
    let (g, d) = small(&params);
    let r = d.residual(&StateFields::zeros(&g)).unwrap();
    assert!(d.layout.salt_range().all(|k| r[k] == 0.0));
}

#[test]
fn jacobian_matches_finite_differences() {
    for params in [BoussinesqParams::regime1(0.05), BoussinesqParams::regime2(0.7)] {
        let (_, d) = small(&params);
        let n = d.n_full();
        let x = random_vec(n, 1, 0.3);
        let v = random_vec(n, 2, 1.0);
        let jv = d.jacobian(&x).mul_vec(&v);
        let f0 = d.rhs(&x);
        let err = |eps: f64| {
            let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            let fp = d.rhs(&xp);
            let diff: Vec<f64> = (0..n).map(|k| (fp[k] - f0[k]) / eps - jv[k]).collect();
            max_abs(&diff)
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 < 1e-3 * max_abs(&jv), "{e1}");
        assert!((e1 / e2).log2() >= 0.9, "observed order {}", (e1 / e2).log2());
    }
}

#[test]
fn schur_apply_matches_dense_and_kills_constant_salt() {
    let params = BoussinesqParams::regime1(0.05);
    let (g, d) = small(&params);
    let s = th_state(&d, &g);
    let lin = assemble_linearization(&d, &s).unwrap();
    let dense = dense_schur(&lin).unwrap();
    let nd = lin.n_dyn();
    let v = random_vec(nd, 3, 1.0);
    let applied = schur_apply(&lin, &v).unwrap();
    for r in 0..nd {
        let dv: f64 = (0..nd).map(|c| dense[(r, c)] * v[c]).sum();
        assert!((dv - applied[r]).abs() < 1e-10 * max_abs(&applied).max(1.0));
    }
    let np = lin.n_psi;
    let mut ones = vec![0.0; nd];
    for k in d.layout.salt_range() {
        ones[k - np] = 1.0;
    }
    assert!(max_abs(&schur_apply(&lin, &ones).unwrap()) < 1e-9);
    // Without a vorticity component only A₂₂ acts.
    let mut w = random_vec(nd, 4, 1.0);
    for k in d.layout.omega_range() {
        w[k - np] = 0.0;
    }
    let a = schur_apply(&lin, &w).unwrap();
    let b = lin.a22.mul_vec(&w);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12 * (1.0 + y.abs())));
}

#[test]
fn zero_base_state_has_no_streamfunction_coupling() {
    let params = BoussinesqParams::regime1(0.05);
    let (g, d) = small(&params);
    let lin = assemble_linearization(&d, &StateFields::zeros(&g)).unwrap();
    assert!(lin.a21.val.iter().all(|&v| v == 0.0));
}

#[test]
fn newton_restart_needs_no_iterations() {
    let params = BoussinesqParams::regime1(0.055);
    let (g, d) = small(&params);
    let s = th_state(&d, &g);
    let (_, rep) = newton_solve(&d, &s, &NewtonOptions::default()).unwrap();
    assert_eq!(rep.iterations, 0);
}

#[test]
fn thermohaline_state_is_reflection_symmetric() {
    let params = BoussinesqParams::regime1(0.055);
    let g = build_grid(19, 39, params.length).unwrap();
    let d = Discretization::new(&g, &params).unwrap();
    let s = th_state(&d, &g);
    let m = mirror_solution(&s, &g, &params).unwrap();
    let scale = max_abs(&s.salt).max(max_abs(&s.temp));
    for (a, b) in [(&s.temp, &m.temp), (&s.salt, &m.salt), (&s.psi, &m.psi)] {
        let diff: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        assert!(max_abs(&diff) < 1e-6 * scale);
    }
}

#[test]
fn mirror_is_an_involution_and_needs_zero_nu() {
    let params = BoussinesqParams::regime1(0.05);
    let (g, d) = small(&params);
    let x = random_vec(d.n_full(), 5, 1.0);
    let s = d.to_state(&x);
    let back = mirror_solution(&mirror_solution(&s, &g, &params).unwrap(), &g, &params).unwrap();
    assert_eq!(back, s);
    assert!(mirror_solution(&s, &g, &BoussinesqParams::regime2(1.0)).is_err());
}

#[test]
fn noiseless_simulations_stay_put() {
    let mut params = BoussinesqParams::regime1(0.05);
    params.sigma = 0.0;
    let (g, d) = small(&params);
    let s = th_state(&d, &g);
    let obs = [indicator_observable(&d, Field::Salt, [-1.0, 0.0, 0.0, 10.0], "S").unwrap()];
    let opts = SimOptions::new(2.0, 0.01, 1);
    let lin = simulate_linearized(&d, &s, &opts, &obs).unwrap();
    assert!(lin.series[0].iter().all(|z| z.norm() == 0.0));
    let non = simulate_nonlinear(&d, &s, &opts, &obs).unwrap();
    assert!(non.max_salt_deviation < 1e-7, "{}", non.max_salt_deviation);
}

#[test]
fn simulations_are_seed_deterministic() {
    let params = BoussinesqParams::regime1(0.05);
    let (g, d) = small(&params);
    let s = th_state(&d, &g);
    let obs = [indicator_observable(&d, Field::Temp, [-0.3, -0.05, 3.0, 9.0], "T").unwrap()];
    let a = simulate_linearized(&d, &s, &SimOptions::new(1.0, 0.01, 9), &obs).unwrap();
    let b = simulate_linearized(&d, &s, &SimOptions::new(1.0, 0.01, 9), &obs).unwrap();
    let c = simulate_linearized(&d, &s, &SimOptions::new(1.0, 0.01, 10), &obs).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.series, c.series);
    assert!(a.series[0].iter().any(|z| z.norm() > 0.0));
}

#[test]
fn empty_rectangle_is_rejected() {
    let params = BoussinesqParams::regime1(0.05);
    let (_, d) = small(&params);
    assert!(indicator_observable(&d, Field::Omega, [0.5, 0.6, 1.0, 2.0], "x").is_err());
}

#[test]
fn natural_continuation_single_point_and_monotonicity() {
    let params = BoussinesqParams::regime1(0.05);
    let (g, d) = small(&params);
    let s = th_state(&d, &g);
    let opts = NaturalOptions { n_eigs: 3, ..NaturalOptions::default() };
    let br = continuation_natural(&d, &[0.05], &s, &opts).unwrap();
    assert_eq!(br.points.len(), 1);
    assert!(br.points[0].residual < 1e-8);
    assert_eq!(br.points[0].leading.len(), 3);
    assert!(br.points[0].leading[0].norm() < 1e-8);
    assert!(continuation_natural(&d, &[0.05, 0.04, 0.06], &s, &opts).is_err());
    let sweep = continuation_natural(&d, &[0.03, 0.04, 0.05, 0.06], &s, &opts).unwrap();
    assert_eq!(sweep.p_values(), vec![0.03, 0.04, 0.05, 0.06]);
    assert!(sweep.to_csv().lines().count() == 5);
}

#[test]
fn small_arclength_steps_agree_with_natural_continuation() {
    let params = BoussinesqParams::regime1(0.03);
    let (g, d) = small(&params);
    let s = th_state(&d, &g);
    let opts = ArclengthOptions { ds: 0.005, ds_max: 0.005, p_min: 0.0, p_max: 0.045, n_eigs: 0, ..ArclengthOptions::default() };
    let arc = continuation_arclength(&d, &s, &opts).unwrap();
    assert!(arc.folds.is_empty());
    let last = arc.points.last().unwrap();
    let nat = continuation_natural(&d, &[0.03, last.p], &s, &NaturalOptions::default()).unwrap();
    let b = &nat.points[1];
    assert!((b.max_psi - last.max_psi).abs() < 1e-6 * b.max_psi.abs().max(1.0));
}
