//! Randomized invariants across the library.

use augport::augment::{
    augment_prices, estimate_volatility, optimal_proposed_variances, price_perturbation_variances,
    AugmentationScheme, SchemeKind, Strength,
};
use augport::backtest::{mcl_slope, sharpe_of_wealth, MclPoint, WealthTrajectory};
use augport::dataio::{PriceSeries, WindowDataset};
use augport::metaopt::{value_curve, AugFamily, ThetaGrid, TrainingSets};
use augport::noise::NoiseSource;
use augport::portfolio::{augmented_closed_form, proposed_optimal_portfolio, sign_strategy, Constraint};
use augport::procgen::{simulate_gbm, simulate_heston, GbmParams, HestonParams};
use augport::stats::normal_cdf;
use augport::utility::{additive_bracket, true_utility_no_aug, true_utility_proposed, training_set, UtilityReport};
use proptest::prelude::*;

fn gbm() -> impl Strategy<Value = GbmParams> {
    (0.1f64..10.0, -0.01f64..0.02, 0.001f64..0.05).prop_map(|(s0, r, sigma)| GbmParams::new(s0, r, sigma).unwrap())
}

fn path(model: &GbmParams, steps: usize, seed: u64) -> PriceSeries {
    simulate_gbm(model, steps, &mut NoiseSource::new(seed).stream(0)).unwrap()
}

fn scaled(series: &PriceSeries, k: f64) -> PriceSeries {
    PriceSeries::new(series.prices().iter().map(|p| p * k).collect(), "scaled").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn returns_round_trip(prices in prop::collection::vec(0.01f64..100.0, 2..200)) {
        let s = PriceSeries::new(prices.clone(), "p").unwrap();
        let back = PriceSeries::from_returns(prices[0], &s.returns(), "b").unwrap();
        for (a, b) in back.prices().iter().zip(&prices) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn window_count(n in 3usize..300, frac in 0.0f64..1.0) {
        let s = path(&GbmParams::new(1.0, 0.001, 0.01).unwrap(), n - 1, n as u64);
        let t = n - 1;
        let l = 1 + ((t - 2) as f64 * frac) as usize;
        let ds = WindowDataset::from_prices(&s, l).unwrap();
        prop_assert_eq!(ds.len(), t + 1 - l);
        for w in &ds.windows {
            prop_assert_eq!(&w.input[..], &s.prices()[w.target_index - l..w.target_index]);
            prop_assert_eq!(w.target, s.prices()[w.target_index]);
        }
        prop_assert_eq!(WindowDataset::from_returns(&s.returns(), l).unwrap().len(), t - l);
    }

    #[test]
    fn simulation_is_deterministic(model in gbm(), seed in any::<u64>()) {
        prop_assert_eq!(path(&model, 50, seed), path(&model, 50, seed));
    }

    #[test]
    fn heston_without_vol_of_vol_is_gbm(model in gbm(), seed in any::<u64>()) {
        let mut h = HestonParams::from_gbm(&model);
        h.kappa = 0.0;
        h.xi = 0.0;
        let src = NoiseSource::new(seed);
        let heston = simulate_heston(&h, 100, &mut src.stream(0), &mut src.stream(1)).unwrap();
        let plain = simulate_gbm(&model, 100, &mut src.stream(0)).unwrap();
        prop_assert_eq!(heston.prices.prices(), plain.prices());
    }

    #[test]
    fn sign_strategy_ignores_price_scale(model in gbm(), seed in any::<u64>(), k in 0.01f64..100.0) {
        let s = path(&model, 60, seed);
        let a = sign_strategy(&s.returns());
        let b = sign_strategy(&scaled(&s, k).returns());
        prop_assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn closed_form_scale_equivariance(model in gbm(), seed in any::<u64>(), k in 0.1f64..10.0, lambda in 0.1f64..50.0) {
        let s = path(&model, 60, seed);
        let g: Vec<Strength> = s.prices()[..60].iter().map(|p| Strength::Finite(1e-4 * p * p)).collect();
        let gk: Vec<Strength> = g.iter().map(|v| Strength::Finite(v.finite().unwrap() * k * k)).collect();
        let sk = scaled(&s, k);
        let a = augmented_closed_form(&s.returns(), &s, lambda, &g, Constraint::Unbounded).unwrap();
        let b = augmented_closed_form(&sk.returns(), &sk, lambda, &gk, Constraint::Unbounded).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn proposed_routes_agree(seed in any::<u64>(), r in 0.001f64..0.02, sigma in 0.005f64..0.05, lambda in 0.1f64..50.0) {
        let model = GbmParams::new(1.0, r, sigma).unwrap();
        let s = path(&model, 80, seed);
        let g = optimal_proposed_variances(&s, &model).unwrap();
        let a = augmented_closed_form(&s.returns(), &s, lambda, &g, Constraint::Unbounded).unwrap();
        let b = proposed_optimal_portfolio(&s.returns(), &model, lambda, Constraint::Unbounded).unwrap();
        for ((x, y), rt) in a.weights.iter().zip(&b.weights).zip(s.returns().values()) {
            if *rt > 0.0 {
                prop_assert!((x - y).abs() <= 1e-9 * y.abs());
            }
        }
    }

    #[test]
    fn closed_form_utilities_decompose(model in gbm(), lambda in 0.1f64..50.0) {
        prop_assume!(model.r > 0.0);
        for u in [true_utility_no_aug(&model, lambda).unwrap(), true_utility_proposed(&model, lambda).unwrap()] {
            prop_assert!((u.value - (u.gain_term - u.risk_term)).abs() <= 1e-12);
        }
        let rescaled = GbmParams::new(model.s0 * 7.0, model.r, model.sigma).unwrap();
        prop_assert_eq!(true_utility_proposed(&model, lambda).unwrap(), true_utility_proposed(&rescaled, lambda).unwrap());
    }

    #[test]
    fn report_decomposition(gain in -1.0f64..1.0, risk in 0.0f64..1.0) {
        let u = UtilityReport::exact(gain, risk);
        prop_assert_eq!(u.value, gain - risk);
    }

    #[test]
    fn wealth_recursion_is_exact(steps in prop::collection::vec((-1.0f64..1.0, -0.05f64..0.05), 1..100)) {
        let (pos, ret): (Vec<f64>, Vec<f64>) = steps.into_iter().unzip();
        let traj = WealthTrajectory::from_positions(&pos, &ret).unwrap();
        let mut w = 1.0;
        for (i, (p, r)) in pos.iter().zip(&ret).enumerate() {
            w *= 1.0 + p * r;
            prop_assert_eq!(traj.wealth[i + 1].to_bits(), w.to_bits());
        }
    }

    #[test]
    fn sharpe_ignores_wealth_scale(seed in any::<u64>(), k in 0.001f64..1000.0) {
        let s = path(&GbmParams::new(1.0, 0.001, 0.01).unwrap(), 100, seed);
        let w = s.prices().to_vec();
        let wk: Vec<f64> = w.iter().map(|x| x * k).collect();
        let (a, b) = (sharpe_of_wealth(&w).unwrap(), sharpe_of_wealth(&wk).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3));
    }

    #[test]
    fn mcl_slope_duplicates_and_domination(points in prop::collection::vec((0.001f64..0.01, 0.001f64..0.05), 1..20)) {
        let pts: Vec<MclPoint> = points
            .iter()
            .map(|(m, r)| MclPoint { mean_return: *m, risk: *r, label: String::new() })
            .collect();
        let (_, base) = mcl_slope(&pts, 0.0).unwrap();
        let doubled: Vec<MclPoint> = pts.iter().chain(&pts).cloned().collect();
        prop_assert_eq!(mcl_slope(&doubled, 0.0).unwrap().1, base);
        let best = mcl_slope(&pts, 0.0).unwrap().0;
        let mut more = pts.clone();
        more.push(MclPoint { mean_return: best.mean_return * 1.5, risk: best.risk, label: "dom".into() });
        prop_assert!(mcl_slope(&more, 0.0).unwrap().1 <= base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn perturbations_have_prescribed_moments(seed in any::<u64>(), kind in 0usize..3) {
        let model = GbmParams::new(1.0, 0.005, 0.02).unwrap();
        let s = path(&model, 30, seed);
        let (scheme, vol) = match kind {
            0 => (AugmentationScheme::new(SchemeKind::Additive, 0.01).unwrap(), None),
            1 => (AugmentationScheme::new(SchemeKind::NaiveMultiplicative, 0.01).unwrap(), None),
            _ => (
                AugmentationScheme::new(SchemeKind::ProposedMultiplicative, 3.0).unwrap(),
                Some(estimate_volatility(&s.returns(), 5).unwrap()),
            ),
        };
        let var = price_perturbation_variances(&s, &scheme, vol.as_ref()).unwrap();
        let n = 20_000;
        let src = NoiseSource::new(seed ^ 0x5a5a);
        let mut sum = vec![0.0; s.len()];
        let mut sq = vec![0.0; s.len()];
        for k in 0..n {
            let z = augment_prices(&s, &scheme, vol.as_ref(), &mut src.stream(k)).unwrap();
            for i in 0..s.len() {
                let d = z[i] - s.prices()[i];
                sum[i] += d;
                sq[i] += d * d;
            }
        }
        let nf = n as f64;
        for i in 0..s.len() {
            if var[i] == 0.0 {
                continue;
            }
            let m = sum[i] / nf;
            let v = sq[i] / nf - m * m;
            // mean within 4 SE; variance of a normal sample has SE v sqrt(2/n)
            prop_assert!(m.abs() <= 4.0 * (var[i] / nf).sqrt());
            prop_assert!((v - var[i]).abs() <= 4.0 * var[i] * (2.0 / nf).sqrt());
        }
    }

    #[test]
    fn cauchy_bound_on_additive_bracket(seed in any::<u64>()) {
        let model = GbmParams::new(1.0, 0.005, 0.01).unwrap();
        let steps = 100;
        let noise = NoiseSource::new(seed);
        let n = 200;
        let brackets: Vec<f64> = (0..n).map(|i| additive_bracket(&training_set(&model, steps, &noise, i).unwrap())).collect();
        let mean = brackets.iter().sum::<f64>() / n as f64;
        prop_assert!(mean <= steps as f64 * normal_cdf(model.r / model.sigma));
    }

    #[test]
    fn metaopt_curves_are_reproducible_and_monotone(seed in any::<u64>(), extra in 0.001f64..0.2) {
        let model = GbmParams::new(1.0, 0.005, 0.01).unwrap();
        let sets = TrainingSets::Sampled { n: 30, steps: 100, noise: NoiseSource::new(seed) };
        let grid = ThetaGrid::linspace(0.01, 0.2, 12, AugFamily::Additive).unwrap();
        let a = value_curve(&grid, &model, 1.0, &sets, Constraint::Unbounded).unwrap();
        let b = value_curve(&grid, &model, 1.0, &sets, Constraint::Unbounded).unwrap();
        prop_assert_eq!(&a, &b);
        let mut values = grid.values.clone();
        values.push(extra);
        let wider = ThetaGrid::new(values, AugFamily::Additive).unwrap();
        let c = value_curve(&wider, &model, 1.0, &sets, Constraint::Unbounded).unwrap();
        prop_assert!(c.argmax().1 >= a.argmax().1);
    }
}
