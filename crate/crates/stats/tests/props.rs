use proptest::prelude::*;
use telewaypoint_stats::{
    f_sf, mixed_anova, sus_score, t_two_sided, tlx_raw, Effect, Group, Participant, RmDataset,
    SusResponse, TlxResponse,
};

fn dataset(values: &[[f64; 4]], shift: f64, scale: f64) -> RmDataset {
    let ps = values
        .iter()
        .enumerate()
        .map(|(i, v)| Participant {
            id: i.to_string(),
            group: Group::ALL[i % 2],
            cells: [[v[0], v[1]], [v[2], v[3]]].map(|r| r.map(|x| x * scale + shift)),
        })
        .collect();
    RmDataset::new(ps).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #[test]
    fn f_is_shift_and_scale_invariant(
        values in prop::collection::vec(prop::array::uniform4(0.0f64..100.0), 4..30),
        shift in -1e3f64..1e3,
        scale in 0.01f64..100.0,
    ) {
        let a = mixed_anova(&dataset(&values, 0.0, 1.0));
        let b = mixed_anova(&dataset(&values, shift, scale));
        for e in Effect::ALL {
            prop_assert!(close(a.get(e).f, b.get(e).f), "{e}: {} vs {}", a.get(e).f, b.get(e).f);
        }
        prop_assert!((a.ss_partition() - a.ss_total).abs() <= 1e-9 * a.ss_total.max(1e-12));
    }

    #[test]
    fn p_decreases_with_statistic(df in 1u32..200, x in 0.0f64..50.0, dx in 0.001f64..10.0) {
        let d = df as f64;
        prop_assert!(f_sf(x + dx, 1.0, d) <= f_sf(x, 1.0, d));
        prop_assert!(f_sf(x + dx, 3.0, d) <= f_sf(x, 3.0, d));
        prop_assert!(t_two_sided(x + dx, d) <= t_two_sided(x, d));
    }

    #[test]
    fn scoring_is_exact_and_order_independent(
        odd in prop::array::uniform5(1i64..=5),
        even in prop::array::uniform5(1i64..=5),
        scales in prop::array::uniform6(0i64..=20),
        rot in 0usize..6,
    ) {
        let items: Vec<i64> = (0..10).map(|i| if i % 2 == 0 { odd[i / 2] } else { even[i / 2] }).collect();
        let s = sus_score(&SusResponse::new(&items).unwrap());
        let expect = 2.5 * (odd.iter().map(|v| v - 1).sum::<i64>() + even.iter().map(|v| 5 - v).sum::<i64>()) as f64;
        prop_assert_eq!(s, expect);
        // permuting within the odd items and within the even items keeps the score
        let mut odd2 = odd;
        odd2.rotate_left(rot % 5);
        let permuted: Vec<i64> = (0..10).map(|i| if i % 2 == 0 { odd2[i / 2] } else { even[i / 2] }).collect();
        prop_assert_eq!(sus_score(&SusResponse::new(&permuted).unwrap()), s);

        let scales: Vec<i64> = scales.iter().map(|v| v * 5).collect();
        let t = tlx_raw(&TlxResponse::new(&scales).unwrap());
        prop_assert_eq!(t, scales.iter().sum::<i64>() as f64 / 6.0);
        let mut r = scales.clone();
        r.rotate_left(rot);
        prop_assert_eq!(tlx_raw(&TlxResponse::new(&r).unwrap()), t);
    }
}
