use ham_cli::config::{format_number, parse_number, RunConfig, Ty, Value, SCHEMA};
use ham_core::Kernel;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        (-1e6f64..1e6),
        (-30i32..30).prop_map(|e| 2f64.powi(e)),
    ]
}

fn value_for(ty: Ty) -> BoxedStrategy<Value> {
    match ty {
        Ty::Float => finite().prop_map(Value::Float).boxed(),
        Ty::Int => any::<u64>().prop_map(Value::Int).boxed(),
        Ty::FloatList => prop::collection::vec(finite(), 0..6).prop_map(Value::FloatList).boxed(),
        Ty::Kernel => prop_oneof![Just(Kernel::Wave), Just(Kernel::Heat)].prop_map(Value::Kernel).boxed(),
        Ty::Bool => any::<bool>().prop_map(Value::Bool).boxed(),
    }
}

fn config() -> impl Strategy<Value = RunConfig> {
    let per_key: Vec<_> =
        SCHEMA.iter().map(|s| prop::option::of(value_for(s.ty)).prop_map(move |v| (s.key, v))).collect();
    per_key.prop_map(|entries| {
        let mut c = RunConfig::new();
        for (k, v) in entries {
            if let Some(v) = v {
                c.set_value(k, v).unwrap();
            }
        }
        c
    })
}

proptest! {
    #[test]
    fn numbers_round_trip(x in finite()) {
        prop_assert_eq!(parse_number(&format_number(x)), Some(x));
    }

    #[test]
    fn parse_serialize_parse_is_identity(c in config()) {
        let text = c.serialize();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(RunConfig::parse(&back.serialize()).unwrap(), back);
    }
}

#[test]
fn negative_zero_survives() {
    let mut c = RunConfig::new();
    c.set_value("lambda", Value::Float(-0.0)).unwrap();
    let back = RunConfig::parse(&c.serialize()).unwrap();
    assert!(back.float("lambda").unwrap().is_sign_negative());
}
