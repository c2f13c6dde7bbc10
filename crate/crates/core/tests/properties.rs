use mcissa::decomposition::{embed, hankelize, uniqueness_against, McissaFit};
use mcissa::grouping::GroupingSpec;
use mcissa::moments::{build_circulant_blocks, build_toeplitz_matrix, circulant_toeplitz_distance};
use mcissa::spectral::num_frequencies;
use mcissa::{
    eigenvector_weights, estimate_autocov, frequency_contributions, participation, read_panel,
    subcomponent_contributions, write_panel, IngestOptions, TimeSeriesPanel,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn panel_strategy(max_dim: usize) -> impl Strategy<Value = (TimeSeriesPanel, usize)> {
    (1..=max_dim, 16usize..=48)
        .prop_flat_map(|(m, t)| {
            (
                proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, t), m),
                2..=t / 2,
            )
        })
        .prop_map(|(rows, l)| {
            (
                mcissa::demean(&TimeSeriesPanel::from_rows(&rows).unwrap()),
                l,
            )
        })
}

fn all_pairs(fit: &McissaFit) -> Vec<(usize, usize)> {
    (1..=num_frequencies(fit.window()))
        .flat_map(|k| (1..=fit.dim()).map(move |m| (k, m)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn completeness((panel, l) in panel_strategy(3)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        let total = fit.reconstruct(&all_pairs(&fit)).unwrap();
        let scale = panel.values().amax().max(1e-300);
        prop_assert!((total - panel.values()).amax() / scale <= 1e-8);
    }

    #[test]
    fn orthonormal_basis((panel, l) in panel_strategy(3)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        prop_assert!(fit.basis().orthonormality_error() <= 1e-10);
    }

    #[test]
    fn eigen_relation((panel, l) in panel_strategy(3)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        let s = fit.circulant().full_matrix();
        prop_assert!(fit.basis().eigen_residual(&s) <= 1e-8);
    }

    #[test]
    fn uniqueness((panel, l) in panel_strategy(3)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        let report = uniqueness_against(&fit).unwrap();
        prop_assert!(report.passes(1e-8), "{}", report.max_scaled());
    }

    #[test]
    fn eigenvalue_pairing_and_trace((panel, l) in panel_strategy(3)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        let b = fit.basis();
        for k in 2..=l {
            for m in 1..=fit.dim() {
                let a = b.eigenvalue(k, m);
                let p = b.eigenvalue(l + 2 - k, m);
                prop_assert!((a - p).abs() <= 1e-8 * (1.0 + a));
                prop_assert!(a >= 0.0);
            }
        }
        let sum: f64 = b.eigenvalues().iter().sum();
        let want = l as f64 * fit.autocov().gammas()[0].trace();
        prop_assert!((sum - want).abs() <= 1e-8 * want.max(1e-300));
    }

    #[test]
    fn participation_identity((panel, l) in panel_strategy(4)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        let pi = participation(fit.basis());
        for k in 1..=l {
            for m in 1..=fit.dim() {
                let lambda = fit.basis().eigenvalue(k, m);
                prop_assert!((pi.sum(k, m) - lambda).abs() <= 1e-10 * (1.0 + lambda));
            }
        }
    }

    #[test]
    fn percentage_tables((panel, l) in panel_strategy(3)) {
        let fit = McissaFit::new(&panel, l).unwrap();
        let table = frequency_contributions(fit.spectra()).unwrap();
        prop_assert!((table.total() - 100.0).abs() <= 1e-9);
        prop_assert!(table.rows.iter().all(|r| r.share >= 0.0));
        for k in 1..=num_frequencies(l) {
            if let Ok(c) = subcomponent_contributions(fit.spectra(), k) {
                prop_assert!((c[c.len() - 1] - 100.0).abs() <= 1e-9);
            }
            for m in 1..=fit.dim() {
                let w = eigenvector_weights(fit.spectra(), k, m).unwrap();
                prop_assert!((w.iter().sum::<f64>() - 100.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn relabeling_series((panel, l) in panel_strategy(3)) {
        let m = panel.dim();
        let order: Vec<usize> = (0..m).rev().collect();
        let swapped = panel.permute(&order).unwrap();
        let a = McissaFit::new(&panel, l).unwrap();
        let b = McissaFit::new(&swapped, l).unwrap();
        let ta = frequency_contributions(a.spectra()).unwrap();
        let tb = frequency_contributions(b.spectra()).unwrap();
        for (x, y) in ta.rows.iter().zip(&tb.rows) {
            prop_assert!((x.share - y.share).abs() <= 1e-9);
        }
        let scale = panel.values().amax().max(1e-300);
        for k in 1..=num_frequencies(l) {
            for (i, &j) in order.iter().enumerate() {
                let ca = a.frequency_component(k, j).unwrap();
                let cb = b.frequency_component(k, i).unwrap();
                for (p, q) in ca.iter().zip(&cb) {
                    prop_assert!((p - q).abs() <= 1e-8 * scale);
                }
            }
        }
    }

    #[test]
    fn hankelize_embedding_identity((panel, l) in panel_strategy(3)) {
        let x = embed(&panel, l).unwrap();
        for i in 0..panel.dim() {
            prop_assert_eq!(hankelize(&x.series(i)).unwrap(), panel.series(i));
        }
        for r in 1..l {
            for c in 0..x.columns() - 1 {
                prop_assert_eq!(x.block(r, c), x.block(r - 1, c + 1));
            }
        }
    }

    #[test]
    fn hankelize_is_linear(
        (l, n, a, b) in (1usize..6, 0usize..8).prop_flat_map(|(l, extra)| {
            let n = l + extra;
            (Just(l), Just(n),
             proptest::collection::vec(-5.0f64..5.0, l * n),
             proptest::collection::vec(-5.0f64..5.0, l * n))
        })
    ) {
        let a = DMatrix::from_vec(l, n, a);
        let b = DMatrix::from_vec(l, n, b);
        let sum = hankelize(&(&a + &b)).unwrap();
        let ha = hankelize(&a).unwrap();
        let hb = hankelize(&b).unwrap();
        for ((s, x), y) in sum.iter().zip(&ha).zip(&hb) {
            prop_assert!((s - (x + y)).abs() <= 1e-12);
        }
    }

    #[test]
    fn moment_matrices((panel, l) in panel_strategy(3)) {
        let acv = estimate_autocov(&panel, l).unwrap();
        let st = build_toeplitz_matrix(&acv);
        prop_assert!((&st - st.transpose()).amax() <= 1e-12);
        let sc = build_circulant_blocks(&acv).full_matrix();
        prop_assert_eq!(&sc, &sc.transpose());
        prop_assert!(circulant_toeplitz_distance(&acv) >= 0.0);
    }

    #[test]
    fn csv_round_trip((panel, _l) in panel_strategy(3)) {
        let mut buf = Vec::new();
        write_panel(&panel, &mut buf).unwrap();
        let back = read_panel(buf.as_slice(), &IngestOptions::default()).unwrap();
        prop_assert_eq!(back.values(), panel.values());
        prop_assert_eq!(back.names(), panel.names());
    }

    #[test]
    fn grouping_display_round_trips(
        l in 4usize..40,
        ks in proptest::collection::btree_set(1usize..12, 1..4),
        p in 2u32..30,
    ) {
        let ks: Vec<String> = ks.into_iter().map(|k| format!("k={k}")).collect();
        let text = format!("a:{}; b:period>={p}[m=1]", ks.join(","));
        let spec = GroupingSpec::parse(&text).unwrap();
        let again = GroupingSpec::parse(&spec.to_string()).unwrap();
        prop_assert_eq!(&spec, &again);
        if let (Ok(x), Ok(y)) = (spec.resolve(l, 2), again.resolve(l, 2)) {
            prop_assert_eq!(x, y);
        }
    }
}
