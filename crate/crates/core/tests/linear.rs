use h4bp::equilibria::{discriminant, frequencies, mu_critical, resonant_mu};
use h4bp::reference::{resonant_mu_2_radical, resonant_mu_3_radical, RESONANT_MU_PRINTED};
use h4bp::SystemParams;

#[test]
fn resonant_masses_give_integer_frequency_ratios() {
    for k in 1..=10 {
        let mu = resonant_mu(k).unwrap();
        let lin = frequencies(&SystemParams::new(mu).unwrap()).unwrap();
        assert!((lin.ratio() - f64::from(k)).abs() < 1e-9 * f64::from(k), "k = {k}: {}", lin.ratio());
    }
}

#[test]
fn resonant_masses_round_to_printed_values() {
    for (k, printed) in RESONANT_MU_PRINTED {
        let mu = resonant_mu(k).unwrap();
        // Printed to six decimals, some truncated rather than rounded.
        assert!((mu - printed).abs() < 1.5e-6, "k = {k}: {mu} vs {printed}");
    }
}

#[test]
fn closed_radicals_for_low_orders() {
    assert!((resonant_mu(2).unwrap() - resonant_mu_2_radical()).abs() < 1e-15);
    assert!((resonant_mu(3).unwrap() - resonant_mu_3_radical()).abs() < 1e-15);
}

#[test]
fn resonances_accumulate_at_the_critical_mass() {
    let mu0 = mu_critical();
    let d0 = (1.0 - 3.0 * mu0 + 3.0 * mu0 * mu0).sqrt();
    assert!(discriminant(d0).abs() < 1e-12);
    assert!((resonant_mu(1).unwrap() - mu0).abs() < 1e-12);
    let mut last = mu0;
    for k in 2..=30 {
        let mu = resonant_mu(k).unwrap();
        assert!(mu < last);
        last = mu;
    }
}
