use conrepair::engine::{repair, RepairConfig};
use conrepair::fixtures::{fixture, FIXTURES};
use conrepair::lang::parse;
use conrepair::lang::print::print_program;

#[test]
fn every_fixture_round_trips() {
    for f in FIXTURES {
        let p = f.program().unwrap_or_else(|e| panic!("{}: {e}", f.name));
        assert_eq!(parse(&print_program(&p)).unwrap(), p, "{}", f.name);
    }
}

#[test]
fn sidecars_name_both_modes() {
    for f in FIXTURES {
        assert!(f.expect.contains("[mixed]") && f.expect.contains("[bad-only]"), "{}", f.name);
    }
}

#[test]
fn fallback_trades_reorders_for_atomic_sections() {
    let p = fixture("ex-regr").unwrap().program().unwrap();
    let plain = repair(&p, &RepairConfig::default());
    let sound = repair(
        &p,
        &RepairConfig {
            sound_fallback: true,
            ..RepairConfig::default()
        },
    );
    assert_eq!(plain.iterations, 1);
    assert!(plain.contracts_held() && sound.contracts_held());
    assert!(sound.iterations > plain.iterations);
    assert_eq!(sound.program.threads[0].body.len(), 1, "{}", sound.program);
}
