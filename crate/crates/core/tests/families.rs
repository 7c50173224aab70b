use h4bp::continuation::{
    continue_family, members_at, seed_family, seed_family_with, ContinuationOptions, EventKind, FamilyRecord,
    FamilySeed, Limits, Termination,
};
use h4bp::periodic::CorrectorOptions;
use h4bp::reference::SUN_JUPITER_MU;
use h4bp::SystemParams;

fn sj() -> SystemParams {
    SystemParams::new(SUN_JUPITER_MU).unwrap()
}

fn trace(seed: FamilySeed, c_min: f64, c_max: f64) -> FamilyRecord {
    let p = sj();
    let opts = ContinuationOptions { limits: Limits { c_min, c_max, max_members: 100_000 }, ..Default::default() };
    let first = seed_family_with(&p, seed, &opts).unwrap();
    continue_family(&p, seed.name(), &first, seed.default_heading(), &opts).unwrap()
}

#[test]
fn ha_loses_horizontal_stability_at_published_value() {
    let rec = trace(FamilySeed::Ha, 4.2, 4.5);
    let e = rec.events_of(EventKind::AhCritical(-2)).next().expect("a_h = -2 crossing");
    assert!((e.c - 4.26725).abs() < 1e-2, "{}", e.c);
    let o = &rec.members[e.member];
    assert!((o.half_a + 1.0).abs() < 1e-6);
    assert!(rec.events.iter().any(|b| b.kind == EventKind::Bifurcation && (b.c - e.c).abs() < 1e-9));
}

#[test]
fn a2_is_the_mirror_image_of_a() {
    let a = trace(FamilySeed::A, -0.5, f64::INFINITY);
    let a2 = trace(FamilySeed::A2, -0.5, f64::INFINITY);
    assert_eq!(a.events.len(), a2.events.len());
    for (x, y) in a.events.iter().zip(&a2.events) {
        assert_eq!(x.kind, y.kind);
        assert!((x.c - y.c).abs() < 1e-8);
        let (u, v) = (a.members[x.member].ic, a2.members[y.member].ic);
        assert!((u.x + v.x).abs() < 1e-7 && (u.vy + v.vy).abs() < 1e-7);
    }
}

#[test]
fn long_family_ends_on_a_six_fold_short_orbit() {
    let p = sj();
    let long = trace(FamilySeed::Long, -10.0, 10.0);
    assert_eq!(long.termination, Termination::Cover);
    let last = long.members.last().unwrap();
    let event = long.events.last().unwrap();
    assert_eq!(event.kind, EventKind::Bifurcation);
    assert!(event.detail.contains("6-fold"), "{}", event.detail);

    // The short-family member at the same energy, traced independently,
    // closes six times within the terminal long-family period.
    let short = seed_family(&p, FamilySeed::Short).unwrap();
    let s = &members_at(&p, &short, &[last.c], &CorrectorOptions::default()).unwrap()[0];
    assert!((6.0 * s.period - last.period).abs() < 1e-4, "{} vs {}", 6.0 * s.period, last.period);
    // Both perpendicular crossings of the y-axis are candidates for the
    // cover's initial condition.
    let half = h4bp::periodic::state_after(&p, &Default::default(), s, 0.5 * s.period).unwrap();
    let nearest = [s.ic, half]
        .iter()
        .map(|q| (q.x - last.ic.x).abs().max((q.y - last.ic.y).abs()).max((q.vx - last.ic.vx).abs()))
        .fold(f64::INFINITY, f64::min);
    assert!(nearest < 1e-4, "{nearest}");
}

#[test]
fn hb_turning_point_is_its_maximum() {
    let rec = trace(FamilySeed::Hb, 4.0, 4.5);
    let e = rec.events_of(EventKind::TurningPoint).next().expect("turning point");
    let c_max = rec.members.iter().map(|o| o.c).fold(f64::NEG_INFINITY, f64::max);
    assert!((e.c - c_max).abs() < 1e-9);
    assert!((e.c - 4.2451).abs() < 1e-2);
}

#[test]
fn g_branches_split_at_the_pitchfork() {
    let p = sj();
    let up = seed_family(&p, FamilySeed::GUpper).unwrap();
    let low = seed_family(&p, FamilySeed::GLower).unwrap();
    assert!((up.c - 4.4984).abs() < 1e-2 && (low.c - 4.4984).abs() < 1e-2);
    assert!(up.ic.x > low.ic.x);
    assert!(up.ic.y.abs() < 1e-14 && low.ic.y.abs() < 1e-14);
}

#[test]
fn natural_continuation_hits_targets() {
    let p = sj();
    let seed = seed_family(&p, FamilySeed::Short).unwrap();
    let targets = [0.3, 0.0, -1.0];
    let members = members_at(&p, &seed, &targets, &CorrectorOptions::default()).unwrap();
    for (o, c) in members.iter().zip(targets) {
        assert!((o.c - c).abs() < 1e-12, "{} vs {c}", o.c);
        assert!(o.closure_error(&p, &Default::default()).unwrap() < 1e-9);
    }
}
