use proptest::prelude::*;

use hamsdm::net::{Mutation, Phase, Role, TamperPolicy, TamperRule};
use hamsdm::protocols::io::OUTPUT;
use hamsdm::protocols::mult::{mult, prep_mult, MULT};
use hamsdm::protocols::{
    input, mult_exp, open, prep_input, prep_mult_exp, ProtocolError, Session, SessionConfig,
};
use hamsdm::ring::{RingElement, RingParams};

fn params() -> RingParams {
    RingParams::new(64, 64, 16).unwrap()
}

fn helper_released(s: &Session) -> bool {
    s.fabric.messages().iter().any(|m| m.label == OUTPUT && m.from == Role::Helper)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tampered_product_aborts_before_release(
        x in any::<i64>(),
        y in any::<i64>(),
        from_king in any::<bool>(),
        by in 1u128..u128::MAX,
        seed in any::<u64>(),
    ) {
        let p = params();
        let from = if from_king { Role::King } else { Role::Party(0) };
        let rule = TamperRule {
            phase: Some(Phase::Online),
            label: Some(MULT.into()),
            from: Some(from),
            to: None,
            occurrence: 0,
            element: 0,
            mutation: Mutation::Offset(RingElement(by & p.share_mask())),
        };
        let policy = TamperPolicy::new(3, [0], vec![rule]).unwrap();
        let mut s = Session::new(SessionConfig::new(p, 3, seed).with_tamper(policy)).unwrap();
        let a = prep_input(&mut s, 1, 1).unwrap();
        let b = prep_input(&mut s, 2, 1).unwrap();
        let ws = input(&mut s, &[(&a, &[p.from_signed(x as i128)]), (&b, &[p.from_signed(y as i128)])]).unwrap();
        let plans = prep_mult(&mut s, &[(ws[0][0], ws[1][0])]).unwrap();
        let z = mult(&mut s, &plans).unwrap();
        let res = open(&mut s, &z, &[1, 2]);
        if s.fabric.any_tampered() {
            prop_assert!(matches!(res, Err(ProtocolError::Abort(_))), "{res:?}");
            prop_assert!(!helper_released(&s));
            prop_assert!(s.parties.iter().all(|p| p.outputs.is_empty()));
        } else {
            let want = p.to_value_domain(p.from_signed(x as i128 * y as i128));
            prop_assert_eq!(res.unwrap().values()[0], want);
        }
    }

    #[test]
    fn tampered_remask_aborts(
        x in -50i128..50,
        k in 1usize..5,
        by in 1u128..u128::MAX,
        seed in any::<u64>(),
    ) {
        let p = params();
        let rule = TamperRule {
            phase: Some(Phase::Online),
            label: Some("remask".into()),
            from: Some(Role::Party(0)),
            to: None,
            occurrence: 0,
            element: 0,
            mutation: Mutation::Offset(RingElement(by & p.share_mask())),
        };
        let policy = TamperPolicy::new(2, [0], vec![rule]).unwrap();
        let mut s = Session::new(SessionConfig::new(p, 2, seed).with_tamper(policy)).unwrap();
        let a = prep_input(&mut s, 1, 1).unwrap();
        let w = input(&mut s, &[(&a, &[p.from_signed(x)])]).unwrap()[0][0];
        let plans = prep_mult_exp(&mut s, &[w], k).unwrap();
        let outs = mult_exp(&mut s, &plans).unwrap().concat();
        let res = open(&mut s, &outs, &[0, 1]);
        prop_assert!(matches!(res, Err(ProtocolError::Abort(_))), "{res:?}");
        prop_assert!(!helper_released(&s));
    }

    #[test]
    fn honest_powers_open_to_recipients_only(
        x in -100i128..100,
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        let p = params();
        let mut s = Session::new(SessionConfig::new(p, 3, seed)).unwrap();
        let a = prep_input(&mut s, 0, 1).unwrap();
        let w = input(&mut s, &[(&a, &[p.from_signed(x)])]).unwrap()[0][0];
        let plans = prep_mult_exp(&mut s, &[w], k).unwrap();
        let outs = mult_exp(&mut s, &plans).unwrap().concat();
        let opened = open(&mut s, &outs, &[2]).unwrap();
        prop_assert!(opened.per_party[0].is_none() && opened.per_party[1].is_none());
        let want: Vec<i128> = (1..=k as u32).map(|j| x.pow(j)).collect();
        prop_assert_eq!(opened.signed(&p), want);
        prop_assert!(s.parties[0].outputs.is_empty());
    }
}
