use std::collections::HashMap;

use proptest::prelude::*;

use region_solve::expr::{BinaryOp, Expression, Node, UnaryOp, Var};
use region_solve::field::{ModifiedField, VectorField};
use region_solve::functionals::{Atom, LinearFunctional};
use region_solve::path::{Grid, SampledPath};
use region_solve::regions::{AdmissiblePair, ConvexPiece, Region};

// Reference evaluator over the AST, written without the crate's evaluator.
fn reference(node: &Node, t: f64, x: &[f64]) -> Option<f64> {
    let v = match node {
        Node::Const(c) => *c,
        Node::Var(Var::Time) => t,
        Node::Var(Var::State(k)) => x[*k],
        Node::Unary(op, a) => {
            let a = reference(a, t, x)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log if a > 0.0 => a.ln(),
                UnaryOp::Log => return None,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Sqrt if a >= 0.0 => a.sqrt(),
                UnaryOp::Sqrt => return None,
                UnaryOp::Abs => a.abs(),
            }
        }
        Node::Binary(op, a, b) => {
            let (a, b) = (reference(a, t, x)?, reference(b, t, x)?);
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if b != 0.0 => a / b,
                BinaryOp::Div => return None,
                BinaryOp::Pow => a.powf(b),
            }
        }
    };
    v.is_finite().then_some(v)
}

fn arb_node() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (-4.0..4.0f64).prop_map(Node::Const),
        Just(Node::Var(Var::Time)),
        (0..2usize).prop_map(|k| Node::Var(Var::State(k))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Log),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Sqrt),
            Just(UnaryOp::Abs),
        ];
        let binary = prop_oneof![
            Just(BinaryOp::Add),
            Just(BinaryOp::Sub),
            Just(BinaryOp::Mul),
            Just(BinaryOp::Div),
            Just(BinaryOp::Pow),
        ];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, a)| Node::Unary(op, Box::new(a))),
            (binary, inner.clone(), inner).prop_map(|(op, a, b)| Node::Binary(
                op,
                Box::new(a),
                Box::new(b)
            )),
        ]
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn grid() -> Grid {
    Grid::new(0.0, 1.0, 40).unwrap()
}

fn arb_path(dim: usize) -> impl Strategy<Value = SampledPath> {
    prop::collection::vec(-3.0..3.0f64, grid().len() * dim)
        .prop_map(move |v| SampledPath::from_values(grid(), dim, v).unwrap())
}

fn arb_atoms() -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::btree_map(0u32..=1000, -2.0..2.0f64, 0..4).prop_map(|m| {
        m.into_iter()
            .map(|(k, weight)| Atom {
                at: f64::from(k) / 1000.0,
                weight,
            })
            .collect()
    })
}

fn arb_functional() -> impl Strategy<Value = LinearFunctional> {
    (arb_atoms(), prop::option::of(0usize..3)).prop_map(|(atoms, d)| {
        let density = d.map(|k| {
            let text = ["1", "s^2 - 0.5", "cos(3*s)"][k];
            Expression::parse_univariate(text, "s").unwrap()
        });
        LinearFunctional::new(0.0, 1.0, atoms, density).unwrap()
    })
}

fn arb_region() -> impl Strategy<Value = Region> {
    prop_oneof![
        (0.5..3.0f64, -0.5..0.5f64)
            .prop_map(|(r, c)| Region::ball(0.0, 1.0, vec![0.5, c, -c], r).unwrap()),
        (0.5..3.0f64).prop_map(|r| Region::tube(0.0, 1.0, vec![0.2, 0.0], r).unwrap()),
        (0.2..2.0f64, 0.2..2.0f64).prop_map(|(w, v)| {
            Region::boxed(0.0, 1.0, vec![0.0, -w, -v], vec![1.0, w, v]).unwrap()
        }),
        (1.0..3.0f64, -1.0..1.0f64).prop_map(|(r, o)| {
            Region::convex(
                0.0,
                1.0,
                2,
                vec![
                    ConvexPiece::Tube {
                        center: vec![0.0, 0.0],
                        radius: r,
                    },
                    ConvexPiece::HalfSpace {
                        normal: vec![0.0, 1.0, 1.0],
                        offset: o,
                    },
                ],
            )
            .unwrap()
        }),
    ]
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    (0.0..1.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(t, x, y)| vec![t, x, y])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eval_matches_reference(node in arb_node(), t in -2.0..2.0f64, x in -2.0..2.0f64, y in -2.0..2.0f64) {
        let e = Expression::from_node(node.clone(), 2);
        let expected = reference(&node, t, &[x, y]);
        match (e.eval(t, &[x, y]), expected) {
            (Ok(v), Some(r)) => prop_assert!(close(v, r, 1e-12), "{v} vs {r} for {e}"),
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{e}: {got:?} vs {want:?}"),
        }
    }

    #[test]
    fn display_round_trips(node in arb_node()) {
        let e = Expression::from_node(node, 2);
        let printed = e.to_string();
        let back = Expression::parse(&printed, 2).unwrap();
        prop_assert_eq!(back.to_string(), printed);
        let env: HashMap<String, f64> =
            [("t".to_string(), 0.3), ("x1".to_string(), 0.7), ("x2".to_string(), -1.1)].into();
        match (e.eval_env(&env), back.eval_env(&env)) {
            (Ok(a), Ok(b)) => prop_assert!(close(a, b, 1e-12)),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn functional_is_linear(g in arb_functional(), u in arb_path(2), v in arb_path(2), alpha in -3.0..3.0f64) {
        let nodal = g.on_grid(&grid()).unwrap();
        let w = u.combine(alpha, &v, 1.0);
        let (gu, gv, gw) = (nodal.apply(&u), nodal.apply(&v), nodal.apply(&w));
        for i in 0..2 {
            prop_assert!(close(gw[i], alpha * gu[i] + gv[i], 1e-12));
        }
    }

    #[test]
    fn theta_forms_agree(g in arb_functional(), f in arb_path(2)) {
        let nodal = g.on_grid(&grid()).unwrap();
        let direct = nodal.theta_direct(&f);
        let swapped = nodal.theta(&f);
        for i in 0..2 {
            prop_assert!(close(direct[i], swapped[i], 1e-11), "{direct:?} vs {swapped:?}");
        }
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive(region in arb_region(), p in point(), q in point()) {
        let pp = region.project(&p).unwrap();
        let pq = region.project(&q).unwrap();
        prop_assert!(region.contains_point(&pp));
        let again = region.project(&pp).unwrap();
        let drift: f64 = again.iter().zip(&pp).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(drift <= 1e-7, "drift {drift}");
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d(&pp, &pq) <= d(&p, &q) + 1e-7);
    }

    #[test]
    fn modified_field_agrees_inside(region in arb_region(), p in point()) {
        let pair = AdmissiblePair::half_squared_distance(&region).unwrap();
        let field = VectorField::parse(&["exp(-x2) - t", "x1*x2 + sin(t)"], 2).unwrap();
        let fr = ModifiedField::new(field.clone(), pair, grid()).unwrap();
        let edge = region.project(&p).unwrap();
        let t = edge[0];
        let deep = region.slice_interior_point(t, 0.0);
        prop_assume!(deep.is_some());
        let x: Vec<f64> = deep.unwrap().iter().zip(&edge[1..]).map(|(c, e)| 0.5 * (c + e)).collect();
        prop_assert!(region.boundary_depth(t, &x) > 0.0);
        prop_assert_eq!(fr.eval(t, &x).unwrap(), field.eval(t, &x).unwrap());
    }
}
