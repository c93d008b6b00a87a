use epf_core::features::{build_designs, FeatureLayout};
use epf_core::marketdata::{generate_synthetic, SyntheticSpec, HOURS};

fn exact_spec(offshore: bool) -> SyntheticSpec {
    SyntheticSpec {
        noise_scale: 0.0,
        nonlinearity: 0.0,
        has_wind_offshore: offshore,
        ..SyntheticSpec::default()
    }
}

#[test]
fn noiseless_prices_follow_the_reduced_design() {
    for offshore in [true, false] {
        let m = generate_synthetic(120, 21, &exact_spec(offshore)).unwrap();
        let layout = FeatureLayout::new(offshore);
        let designs = build_designs(&m.series, &layout).unwrap();
        let c = &m.coefficients;
        for d in &designs {
            for h in 0..HOURS {
                let x = &d.reduced_x[h];
                assert_eq!(x.len(), c.slopes[h].len());
                let fit = c.intercept[h] + c.slopes[h].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
                let tol = 1e-9 * (1.0 + d.targets[h].abs());
                assert!((fit - d.targets[h]).abs() < tol, "{} h{h}: {fit} vs {}", d.date, d.targets[h]);
            }
        }
    }
}

#[test]
fn planted_interaction_is_the_only_residual() {
    let spec = SyntheticSpec {
        noise_scale: 0.0,
        nonlinearity: 20.0,
        ..SyntheticSpec::default()
    };
    let m = generate_synthetic(90, 5, &spec).unwrap();
    let layout = FeatureLayout::new(true);
    let designs = build_designs(&m.series, &layout).unwrap();
    let c = &m.coefficients;
    let mut max_inter: f64 = 0.0;
    for (d, design) in designs.iter().enumerate() {
        let day = d + 7;
        for h in 0..HOURS {
            let x = &design.reduced_x[h];
            let linear = c.intercept[h] + c.slopes[h].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
            let inter = c.interaction(m.series.load[day][h], m.series.solar[day][h]);
            max_inter = max_inter.max(inter.abs());
            let tol = 1e-9 * (1.0 + design.targets[h].abs());
            assert!((linear + inter - design.targets[h]).abs() < tol);
        }
    }
    assert!(max_inter > 1.0);
}
