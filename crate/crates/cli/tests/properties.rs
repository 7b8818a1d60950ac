use gpdm_cli::harness::fit_slope;
use gpdm_cli::plot::{loglog_svg, Series};
use gpdm_cli::problems::Size;
use proptest::prelude::*;

proptest! {
    #[test]
    fn sizes_roundtrip_through_text(n in 1usize..1_000_000, i in 1usize..5000, j in 1usize..5000) {
        for s in [Size::Count(n), Size::Grid([i, j])] {
            prop_assert_eq!(s.to_string().parse::<Size>().unwrap(), s);
        }
    }

    #[test]
    fn power_laws_fit_exactly(p in -3.0f64..1.0, c in 1e-6f64..1e3, mut ns in proptest::collection::vec(10.0f64..1e5, 3..8)) {
        ns.sort_by(f64::total_cmp);
        ns.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-3);
        prop_assume!(ns.len() >= 3);
        let errs: Vec<f64> = ns.iter().map(|n| c * n.powf(p)).collect();
        let fit = fit_slope(&ns, &errs).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-7);
        prop_assert!(fit.half_width < 1e-7);
    }

    #[test]
    fn charts_are_well_formed(ys in proptest::collection::vec(1e-12f64..1e3, 1..12), label in "[a-z<&>]{1,8}") {
        let points: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (100.0 * 2f64.powi(i as i32), y)).collect();
        let svg = loglog_svg("t", "N", "err", &[Series { label: label.clone(), points }], &[-1.0], None).unwrap();
        prop_assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let escaped_label = label.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        prop_assert!(svg.contains(&escaped_label));
        prop_assert!(!svg.contains("NaN"));
    }
}
