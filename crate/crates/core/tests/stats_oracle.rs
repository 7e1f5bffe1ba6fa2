//! Reference values computed at 50 digits by tests/oracles/t_reference.py.
mod common;

use survey_core::stats::{cohens_d, student_t_test, two_tailed_p, welch_t_test};

const SLEEP: ([f64; 10], [f64; 10]) = (
    [0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0],
    [1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4],
);
const UNEQUAL: ([f64; 7], [f64; 9]) = (
    [19.1, 21.4, 18.7, 22.3, 20.0, 24.5, 17.9],
    [25.2, 23.9, 27.4, 22.8, 26.1, 24.0, 28.3, 25.5, 23.1],
);
const SMALL: ([f64; 3], [f64; 4]) = ([1.0, 2.0, 4.0], [3.0, 5.0, 6.0, 9.0]);

// (t, df, p) student, (t, df, p) welch, d
type Expected = ((f64, f64, f64), (f64, f64, f64), f64);

fn check(name: &str, a: &[f64], b: &[f64], e: Expected) {
    let tol = 1e-6;
    let s = student_t_test(a, b).unwrap();
    let w = welch_t_test(a, b).unwrap();
    let d = cohens_d(a, b).unwrap();
    for (what, got, want) in [
        ("student t", s.t, e.0 .0),
        ("student df", s.df, e.0 .1),
        ("student p", s.p, e.0 .2),
        ("welch t", w.t, e.1 .0),
        ("welch df", w.df, e.1 .1),
        ("welch p", w.p, e.1 .2),
        ("d", d, e.2),
    ] {
        assert!((got - want).abs() < tol, "{name} {what}: {got} vs {want}");
    }
}

#[test]
fn sleep_pair() {
    check(
        "sleep",
        &SLEEP.0,
        &SLEEP.1,
        (
            (-1.8608134674868531, 18.0, 0.079186714215938111),
            (-1.8608134674868531, 17.77647351617849, 0.079394140187358138),
            -0.83218108134953966,
        ),
    );
}

#[test]
fn unequal_pair() {
    check(
        "unequal",
        &UNEQUAL.0,
        &UNEQUAL.1,
        (
            (-4.3658407072506991, 14.0, 0.00064595078589838827),
            (-4.2499034959341118, 11.509088713768311, 0.0012358853516652958),
            -2.2001769095443231,
        ),
    );
}

#[test]
fn small_pair() {
    check(
        "small",
        &SMALL.0,
        &SMALL.1,
        (
            (-2.067124712129309, 5.0, 0.093581189547718283),
            (-2.2334123138816575, 4.9064241586382685, 0.076861040646339397),
            -1.5787925773743932,
        ),
    );
}

#[test]
fn p_values_at_fixed_points() {
    for (t, df, p) in [
        (2.088, 38.0, 0.043552803493350707),
        (1.0, 1.0, 0.5),
        (2.5, 5.0, 0.054490099342376241),
        (0.3, 100.0, 0.76479988030030348),
        (4.0, 10.0, 0.0025183326247366923),
    ] {
        let got = two_tailed_p(t, df).unwrap();
        assert!((got - p).abs() < 1e-9, "t={t} df={df}: {got} vs {p}");
        assert_eq!(two_tailed_p(-t, df).unwrap(), got);
    }
}

#[test]
fn swapping_samples_flips_sign_only() {
    let ab = student_t_test(&UNEQUAL.0, &UNEQUAL.1).unwrap();
    let ba = student_t_test(&UNEQUAL.1, &UNEQUAL.0).unwrap();
    assert_eq!(ab.t, -ba.t);
    assert_eq!(ab.p, ba.p);
}

/// The reference comparison of the best adaptive condition against the
/// baseline reports summary statistics only. Samples with those means and
/// (population) standard deviations reproduce the reference test.
#[test]
fn reference_comparison_is_reproducible_from_summaries() {
    let c2 = common::sample_with_population_stats(0.070, 0.106, 20);
    let base = common::sample_with_population_stats(-0.006, 0.118, 20);
    let tt = student_t_test(&c2, &base).unwrap();
    let d = cohens_d(&c2, &base).unwrap();
    assert_eq!(tt.df, 38.0);
    assert!((tt.t - 2.088).abs() <= 0.005, "t = {}", tt.t);
    assert!((tt.p - 0.044).abs() <= 0.005, "p = {}", tt.p);
    assert!((d - 0.660).abs() <= 0.005, "d = {d}");
}
