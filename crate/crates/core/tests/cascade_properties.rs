use cascade_core::cascade::{mv, st, sv, tri_add, tricase_borrow, TriState};
use cascade_core::question::{encode_example, Answer, Digit, Op, Question};
use cascade_core::{answer_via_cascade, oracle_eval, simulate_carries, Layout};
use proptest::prelude::*;

fn question_strategy() -> impl Strategy<Value = Question> {
    (1usize..=12).prop_flat_map(|n| {
        (
            prop::bool::ANY,
            prop::collection::vec(0u32..10, n),
            prop::collection::vec(0u32..10, n),
        )
            .prop_map(|(sub, a, b)| {
                let op = if sub { Op::Sub } else { Op::Add };
                let text = format!(
                    "{}{}{}",
                    a.iter().map(|d| d.to_string()).collect::<String>(),
                    op.symbol(),
                    b.iter().map(|d| d.to_string()).collect::<String>()
                );
                Question::parse(&text, None).unwrap()
            })
    })
}

fn tri() -> impl Strategy<Value = TriState> {
    prop_oneof![
        Just(TriState::Zero),
        Just(TriState::One),
        Just(TriState::Uncertain)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn cascade_matches_oracle(q in question_strategy()) {
        prop_assert_eq!(answer_via_cascade(&q), oracle_eval(&q));
    }

    #[test]
    fn cascade_bits_equal_simulated_carries(q in question_strategy()) {
        let carries = simulate_carries(&q);
        for k in 0..q.n_digits() {
            match q.op {
                Op::Add => prop_assert_eq!(sv(&q, k), carries[k]),
                Op::Sub => {
                    let negative = oracle_eval(&q).sign == cascade_core::Sign::Minus;
                    prop_assert_eq!(mv(&q, k, negative), carries[k]);
                }
            }
        }
    }

    #[test]
    fn sign_rule(q in question_strategy()) {
        if q.op == Op::Sub {
            let a = answer_via_cascade(&q);
            let less = q.d.digits() < q.d_prime.digits();
            prop_assert_eq!(a.sign == cascade_core::Sign::Minus, less);
            if q.d == q.d_prime {
                prop_assert!(a.is_zero());
            }
            prop_assert_eq!(a.digits[0].value(), 0);
        }
    }

    #[test]
    fn tri_add_algebra(x in tri(), y in tri()) {
        if x != TriState::Uncertain {
            prop_assert_eq!(tri_add(x, y), x);
        } else {
            prop_assert_eq!(tri_add(x, y), y);
        }
    }

    #[test]
    fn encoding_round_trip(q in question_strategy()) {
        let a = oracle_eval(&q);
        let tokens = encode_example(&q, &a);
        let layout = Layout::new(q.n_digits());
        prop_assert_eq!(tokens.len(), layout.seq_len());
        let decoded = Answer::decode(&tokens[layout.question_len()..], q.n_digits()).unwrap();
        prop_assert_eq!(decoded, a);
    }
}

#[test]
fn carry_tricase_is_monotone_in_the_sum() {
    for a in 0..10 {
        for b in 0..10 {
            let (da, db) = (Digit::new(a).unwrap(), Digit::new(b).unwrap());
            for k in 1..4 {
                if a + b >= 10 {
                    assert_eq!(st(da, db, k), TriState::One);
                }
                if a + b <= 8 {
                    assert_eq!(st(da, db, k), TriState::Zero);
                }
            }
            assert_ne!(st(da, db, 0), TriState::Uncertain);
            assert_ne!(tricase_borrow(da, db, 0), TriState::Uncertain);
        }
    }
}

#[test]
fn exhaustive_two_digit_equivalence() {
    for op in [Op::Add, Op::Sub] {
        for a in 0..100 {
            for b in 0..100 {
                let q = Question::from_u64(op, a, b, 2).unwrap();
                assert_eq!(answer_via_cascade(&q), oracle_eval(&q), "{q}");
            }
        }
    }
}
