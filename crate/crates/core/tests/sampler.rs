use occulab_core::fbm::{covariance, fgn_autocovariance, CholeskySampler, CirculantSampler, FbmSpec};
use occulab_core::stats::{mean, Estimate};

/// Lag-k autocovariance of one increment column, using the known zero mean.
fn acov(x: &[f64], k: usize) -> f64 {
    x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / (x.len() - k) as f64
}

#[test]
fn circulant_autocovariance_matches_fgn() {
    for h in [0.25, 0.4, 0.7] {
        let spec = FbmSpec::new(h, 1, 1.0, 256).unwrap();
        let sampler = CirculantSampler::new(spec).unwrap();
        let per: Vec<Vec<f64>> = (0..1500)
            .map(|r| {
                let x = &sampler.increments(17, r)[0];
                (0..=4).map(|k| acov(x, k)).collect()
            })
            .collect();
        for k in 0..=4 {
            let e = Estimate::of_mean(&per.iter().map(|v| v[k]).collect::<Vec<_>>());
            let target = fgn_autocovariance(k as u64, h).unwrap();
            assert!(e.within(target, 4.0), "H={h} k={k}: {e:?} vs {target}");
        }
    }
}

#[test]
fn step_scales_variance() {
    // increments over spacing h have variance h^{2H}
    let h = 0.3;
    let spec = FbmSpec::new(h, 2, 0.25, 128).unwrap();
    let sampler = CirculantSampler::new(spec).unwrap();
    let values: Vec<f64> = (0..800)
        .flat_map(|r| sampler.increments(2, r).into_iter().map(|c| acov(&c, 0)))
        .collect();
    let e = Estimate::of_mean(&values);
    assert!(e.within(0.25f64.powf(2.0 * h), 4.0), "{e:?}");
}

#[test]
fn circulant_and_cholesky_agree_on_endpoint_moments() {
    let h = 1.0 / 3.0;
    let spec = FbmSpec::new(h, 1, 1.0, 64).unwrap();
    let circ = CirculantSampler::new(spec).unwrap();
    let chol = CholeskySampler::new(spec).unwrap();
    let reps = 2000;
    let end = |path: occulab_core::fbm::FbmPath| path.point(64)[0];
    let a: Vec<f64> = (0..reps).map(|r| end(circ.sample(5, r))).collect();
    let b: Vec<f64> = (0..reps).map(|r| end(chol.sample(6, r))).collect();
    for power in [2, 4] {
        let ea = Estimate::of_mean(&a.iter().map(|x| x.powi(power)).collect::<Vec<_>>());
        let eb = Estimate::of_mean(&b.iter().map(|x| x.powi(power)).collect::<Vec<_>>());
        let z = (ea.estimate - eb.estimate) / (ea.se.powi(2) + eb.se.powi(2)).sqrt();
        assert!(z.abs() <= 4.0, "power {power}: z = {z}");
    }
    let var = 64f64.powf(2.0 * h);
    assert!((mean(&a.iter().map(|x| x * x).collect::<Vec<_>>()) / var - 1.0).abs() < 0.15);
}

#[test]
fn path_covariance_matches_closed_form() {
    let h = 0.25;
    let spec = FbmSpec::new(h, 1, 0.5, 32).unwrap();
    let sampler = CirculantSampler::new(spec).unwrap();
    let (i, j) = (10, 25);
    let prods: Vec<f64> = (0..4000)
        .map(|r| {
            let p = sampler.sample(9, r);
            p.point(i)[0] * p.point(j)[0]
        })
        .collect();
    let e = Estimate::of_mean(&prods);
    let target = covariance(i as f64 * 0.5, j as f64 * 0.5, h).unwrap();
    assert!(e.within(target, 4.0), "{e:?} vs {target}");
}

#[test]
fn critical_spec_rejects_mismatched_hurst() {
    let mut spec = FbmSpec::critical(3, 1.0, 10).unwrap();
    spec.hurst = 0.5;
    assert!(spec.validate().is_err());
}
