use bendgraph::brep::resolve_solid;
use bendgraph::datagen::{compare, derive_seed, realize, sample_spec, Profile};
use bendgraph::featrec::recognize;
use bendgraph::step::parse_step;

fn parts_per_profile() -> u64 {
    std::env::var("BENDGRAPH_TEST_PARTS").ok().and_then(|s| s.parse().ok()).unwrap_or(25)
}

#[test]
fn generated_parts_round_trip_and_match_truth() {
    let mut failures = Vec::new();
    for profile in Profile::ALL {
        for i in 0..parts_per_profile() {
            let seed = derive_seed(42, i);
            let spec = sample_spec(seed, profile).unwrap();
            let part = match realize(&spec) {
                Ok(p) => p,
                Err(e) => {
                    failures.push(format!("{profile:?} {i}: realize: {e}"));
                    continue;
                }
            };
            let solid = resolve_solid(&parse_step(&part.step).unwrap()).unwrap();
            match recognize(&solid) {
                Ok(r) => {
                    let p = compare(&part.truth, &solid, &r);
                    if !p.is_empty() {
                        failures.push(format!("{profile:?} {i}: {p:?}"));
                    }
                }
                Err(e) => failures.push(format!("{profile:?} {i}: recognize: {e}")),
            }
        }
    }
    assert!(failures.is_empty(), "{} failures:\n{}", failures.len(), failures.join("\n"));
}

