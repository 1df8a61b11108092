use bendgraph::brep::{build_aag, euler_counts, Dihedral};
use bendgraph::datagen::{compare, cube, l_bracket, plate, plate_with_hole, plate_with_side_hole, u_channel, Part};
use bendgraph::featrec::{recognize, FeatrecError, Role};

fn check(part: &Part) {
    let report = recognize(&part.solid).unwrap();
    let problems = compare(&part.truth, &part.solid, &report);
    assert!(problems.is_empty(), "{problems:#?}");
}

#[test]
fn l_bracket_counts() {
    let p = l_bracket().unwrap();
    let c = euler_counts(&p.solid);
    assert_eq!((c.vertices, c.edges, c.faces), (16, 24, 10));
    let aag = build_aag(&p.solid);
    assert_eq!(aag.edges.len(), 24);
    assert_eq!(aag.count(Dihedral::Smooth), 4);
    check(&p);
    let r = recognize(&p.solid).unwrap();
    assert_eq!(r.bends.len(), 1);
    let b = &r.bends[0];
    assert_eq!((b.inner_radius, b.outer_radius), (4.0, 6.0));
    assert!((b.length - 30.0).abs() < 1e-9);
    assert!((b.bend_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    assert_eq!(b.flange_a.to_array(), [44.0, 44.0, 44.0, 44.0, 0.0]);
    assert_eq!(r.roles.iter().filter(|r| **r == Role::Top).count(), 3);
    assert_eq!(r.roles.iter().filter(|r| **r == Role::Side).count(), 4);
}

#[test]
fn other_fixtures_agree() {
    for p in [plate().unwrap(), u_channel().unwrap(), plate_with_hole().unwrap(), plate_with_side_hole().unwrap()] {
        check(&p);
    }
    assert_eq!(u_channel().unwrap().solid.faces.len(), 14);
}

#[test]
fn cube_is_malformed() {
    assert!(matches!(recognize(&cube().unwrap()), Err(FeatrecError::MalformedSheet(_))));
}
