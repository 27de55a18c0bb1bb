use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sisdiag::catalog::random_poly;
use sisdiag::fiberize::{fiberize_signal, frame_from_generators, project_onto_fiber, GeneratorSet, LatticeWindow};
use sisdiag::fields::{exp_mode, FrequencyGrid, TrigPoly};
use sisdiag::C64;

/// `f̂ = Σ_k χ_{k + [0,1)^d} p_k`, so `‖f̂‖² = Σ_k Σ_m |c_{k,m}|²` exactly.
fn windowed(rng: &mut ChaCha8Rng, window: &LatticeWindow, degree: i64) -> (Vec<TrigPoly>, f64) {
    let pieces: Vec<TrigPoly> = window.points().iter().map(|_| random_poly(rng, window.dim(), degree)).collect();
    let energy = pieces.iter().flat_map(|p| p.terms().iter().map(|(_, c)| c.norm_sqr())).sum();
    (pieces, energy)
}

#[test]
fn parseval_in_two_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let g = FrequencyGrid::new(2, 16).unwrap();
    for _ in 0..5 {
        let window = LatticeWindow::new(2, rng.gen_range(0..=2)).unwrap();
        let (pieces, energy) = windowed(&mut rng, &window, 2);
        let fhat = |xi: &[f64]| {
            let k: Vec<i64> = xi.iter().map(|x| x.floor() as i64).collect();
            window.index_of(&k).map_or(C64::from(0.0), |i| pieces[i].eval(xi))
        };
        let tf = fiberize_signal(fhat, g, &window).unwrap();
        assert!((tf.mean_square_norm() - energy).abs() <= 1e-12 * energy);
    }
}

#[test]
fn translation_is_modulation_in_two_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let g = FrequencyGrid::new(2, 8).unwrap();
    let window = LatticeWindow::new(2, 1).unwrap();
    let (pieces, _) = windowed(&mut rng, &window, 1);
    let fhat = |xi: &[f64]| {
        let k: Vec<i64> = xi.iter().map(|x| x.floor() as i64).collect();
        window.index_of(&k).map_or(C64::from(0.0), |i| pieces[i].eval(xi))
    };
    let m = [2, -3];
    let tf = fiberize_signal(fhat, g, &window).unwrap();
    let tg = fiberize_signal(|xi| fhat(xi) * exp_mode(xi, &m), g, &window).unwrap();
    for (t, w) in g.centers().enumerate() {
        let diff = tg.get(t) - tf.get(t) * exp_mode(&w, &m);
        assert!(diff.camax() < 1e-12);
    }
}

#[test]
fn signal_fibers_project_onto_their_own_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let g = FrequencyGrid::new(1, 32).unwrap();
    let window = LatticeWindow::new(1, 2).unwrap();
    let polys: Vec<Vec<(Vec<i64>, TrigPoly)>> = (0..2)
        .map(|_| window.points().iter().map(|k| (k.clone(), random_poly(&mut rng, 1, 1))).collect())
        .collect();
    let gens = GeneratorSet::from_trig(window, g, &polys).unwrap();
    let frame = frame_from_generators(&gens, 1e-8).unwrap();
    for field in gens.fibers() {
        let p = project_onto_fiber(&frame, field).unwrap();
        for t in 0..g.len() {
            assert!((p.get(t) - field.get(t)).norm() < 1e-10 * field.get(t).norm().max(1.0));
        }
    }
}
