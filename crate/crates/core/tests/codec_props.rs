mod oracles;

use std::time::Instant;

use oracles::trees::random_body;
use pide_core::markup::{normalize, parse_xml, to_xml, Markup, Tree};
use pide_core::yxml::{encode, encoded_len, parse, to_visible};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn depth(body: &[Tree]) -> usize {
    body.iter()
        .map(|t| match t {
            Tree::Text(_) => 0,
            Tree::Elem(_, b) => 1 + depth(b),
        })
        .max()
        .unwrap_or(0)
}

#[test]
fn thousand_random_trees_round_trip() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let bodies: Vec<Vec<Tree>> = (0..1000).map(|_| random_body(&mut rng, 8, 6)).collect();
    let deepest = bodies.iter().map(|b| depth(b)).max().unwrap();
    for body in &bodies {
        assert_eq!(&normalize(body.clone()), body, "generator must produce normal trees");
    }
    // only the codec is on the clock
    let started = Instant::now();
    for (i, body) in bodies.iter().enumerate() {
        let bytes = encode(&body).unwrap();
        assert_eq!(bytes.len(), encoded_len(body), "tree {i}");
        assert_eq!(&parse(&bytes).unwrap(), body, "tree {i}: {}", to_visible(&bytes));
    }
    assert!(deepest >= 5, "generator should reach deep trees");
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn xml_dump_reads_back() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..300 {
        let body = random_body(&mut rng, 5, 4);
        assert_eq!(parse_xml(&to_xml(&body)).unwrap(), body);
    }
}

#[test]
fn printout_shape_in_both_syntaxes() {
    let free = |s: &str| {
        Tree::elem(
            Markup::new("hilite"),
            vec![Tree::elem(Markup::new("free"), vec![Tree::text(s)])],
        )
    };
    let body = vec![Tree::elem(
        Markup::new("warning").with_attr("serial", 553408),
        vec![
            Tree::text("Term: "),
            free("x"),
            Tree::elem(Markup::new("break").with_attr("width", 1), vec![Tree::text(" ")]),
            free("y"),
        ],
    )];
    let xml = to_xml(&body);
    assert!(xml.starts_with("<warning serial=\"553408\">Term: <hilite><free>x</free></hilite>"));
    let visible = to_visible(&encode(&body).unwrap());
    assert!(visible.starts_with("\\x05\\x06warning\\x06serial=553408\\x05Term: "), "{visible}");
}

proptest! {
    #[test]
    fn arbitrary_text_survives(s in "[^\u{5}\u{6}]{0,40}") {
        let body = normalize(vec![Tree::text(s)]);
        prop_assert_eq!(parse(&encode(&body).unwrap()).unwrap(), body.clone());
        prop_assert_eq!(parse_xml(&to_xml(&body)).unwrap(), body);
    }

    #[test]
    fn control_bytes_are_rejected(s in "[a-z]{0,5}", c in prop::sample::select(vec!['\u{5}', '\u{6}'])) {
        let body = vec![Tree::text(format!("{s}{c}"))];
        prop_assert!(encode(&body).is_err());
    }
}

