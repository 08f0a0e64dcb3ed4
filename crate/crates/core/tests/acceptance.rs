//! The twelve acceptance criteria. Criteria 6–8 share one scaling sweep,
//! computed by whichever of them runs first.

use torus_wave::harness::verify::{run_criterion, Hooks};

fn check(id: u8) {
    let outcome = run_criterion(id, &Hooks::default());
    println!("{outcome}");
    assert!(outcome.passed, "{outcome}");
}

#[test]
fn criterion_01_ledger_exactness() {
    check(1);
}

#[test]
fn criterion_02_mu_vanishing() {
    check(2);
}

#[test]
fn criterion_03_increment_equivalence() {
    check(3);
}

#[test]
fn criterion_04_energy_conservation() {
    check(4);
}

#[test]
fn criterion_05_scheme_order() {
    check(5);
}

#[test]
fn criterion_06_mollified_energy_scaling() {
    check(6);
}

#[test]
fn criterion_07_potential_kinetic_separation() {
    check(7);
}

#[test]
fn criterion_08_dispersive_functional() {
    check(8);
}

#[test]
fn criterion_09_nonlinear_smoothing() {
    check(9);
}

#[test]
fn criterion_10_structural_identities() {
    check(10);
}

#[test]
fn criterion_11_admissibility_table() {
    check(11);
}

#[test]
fn criterion_12_sup_variation_decay() {
    check(12);
}
