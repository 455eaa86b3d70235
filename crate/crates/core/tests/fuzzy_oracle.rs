use maglev_core::controllers::fuzzy::{parse_rules, FuzzyRuleBase, LinguisticVariable};
use maglev_core::controllers::fuzzy_infer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tri(x: f64, (a, b, c): (f64, f64, f64)) -> f64 {
    if x < a || x > c {
        0.0
    } else if x <= b {
        if b == a {
            1.0
        } else {
            (x - a) / (b - a)
        }
    } else if c == b {
        1.0
    } else {
        (c - x) / (c - b)
    }
}

const LOW: (f64, f64, f64) = (-1.0, -1.0, 0.0);
const MID: (f64, f64, f64) = (-0.5, 0.0, 0.5);
const HIGH: (f64, f64, f64) = (0.0, 1.0, 1.0);
const NL: (f64, f64, f64) = (-1.0, -1.0, -0.5);
const NS: (f64, f64, f64) = (-1.0, -0.5, 0.0);
const ZERO: (f64, f64, f64) = (-0.5, 0.0, 0.5);
const PS: (f64, f64, f64) = (0.0, 0.5, 1.0);
const PL: (f64, f64, f64) = (0.5, 1.0, 1.0);

/// `(strength, consequent)` pairs for the four published rules.
fn published(e: f64, de: f64) -> Vec<(f64, (f64, f64, f64))> {
    vec![
        (tri(e, MID), ZERO),
        (tri(e, LOW), PL),
        (tri(e, HIGH), NL),
        (tri(e, MID).min(tri(de, HIGH)), NS),
    ]
}

/// Full 3x3 table, mirrored in both inputs.
fn full(e: f64, de: f64) -> Vec<(f64, (f64, f64, f64))> {
    let e_terms = [LOW, MID, HIGH];
    let de_terms = [LOW, MID, HIGH];
    let table = [[PL, PL, PS], [PS, ZERO, NS], [NS, NL, NL]];
    let mut out = Vec::new();
    for (i, et) in e_terms.iter().enumerate() {
        for (j, dt) in de_terms.iter().enumerate() {
            out.push((tri(e, *et).min(tri(de, *dt)), table[i][j]));
        }
    }
    out
}

const FULL_RULES: &str = "\
IF error IS low AND derror IS negative THEN output IS PL
IF error IS low AND derror IS zero THEN output IS PL
IF error IS low AND derror IS positive THEN output IS PS
IF error IS okay AND derror IS negative THEN output IS PS
IF error IS okay AND derror IS zero THEN output IS Zero
IF error IS okay AND derror IS positive THEN output IS NS
IF error IS high AND derror IS negative THEN output IS NS
IF error IS high AND derror IS zero THEN output IS NL
IF error IS high AND derror IS positive THEN output IS NL
";

fn brute_force(fired: &[(f64, (f64, f64, f64))]) -> f64 {
    if fired.iter().all(|(w, _)| *w <= 0.0) {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..2001 {
        let x = -1.0 + k as f64 * 0.001;
        let mu = fired.iter().map(|&(w, mf)| w.min(tri(x, mf))).fold(0.0, f64::max);
        num += x * mu;
        den += mu;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

type Oracle = fn(f64, f64) -> Vec<(f64, (f64, f64, f64))>;

fn check_against_oracle(rb: &FuzzyRuleBase, oracle: Oracle, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let e = rng.random_range(-1.0..=1.0);
        let de = rng.random_range(-1.0..=1.0);
        let u = fuzzy_infer(rb, e, de);
        assert!((-1.0..=1.0).contains(&u));
        worst = worst.max((u - brute_force(&oracle(e, de))).abs());
    }
    assert!(worst < 0.005 * 2.0, "max deviation {worst}");
}

#[test]
fn published_rules_match_dense_centroid() {
    check_against_oracle(&FuzzyRuleBase::table1(), published, 1);
}

#[test]
fn full_table_matches_dense_centroid() {
    let rb = FuzzyRuleBase::new(
        LinguisticVariable::default_error(),
        LinguisticVariable::default_derror(),
        LinguisticVariable::default_output(),
        parse_rules(FULL_RULES).unwrap(),
    )
    .unwrap();
    check_against_oracle(&rb, full, 2);
}

#[test]
fn published_rules_individually() {
    let rb = FuzzyRuleBase::table1();
    // Only "okay" fires at its peak, mapping to the symmetric Zero set.
    assert!(fuzzy_infer(&rb, 0.0, 0.0).abs() < 1e-12);
    assert!(fuzzy_infer(&rb, -1.0, 0.0) > 0.0);
    assert!(fuzzy_infer(&rb, 1.0, 0.0) < 0.0);
    let u = fuzzy_infer(&rb, 0.0, 1.0);
    assert!(u < 0.0 && u > -0.5, "okay and positive gives {u}");
}

#[test]
fn output_stays_inside_universe_even_when_inputs_leave_it() {
    let rb = FuzzyRuleBase::table1();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let u = fuzzy_infer(&rb, rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        assert!((-1.0..=1.0).contains(&u));
    }
}
