//! Property tests for the statistical and wire invariants.

use disthill::central::{aggregate, Weighting};
use disthill::distributions::Shard;
use disthill::numeric::{fmt17, parse17};
use disthill::transport::wire::{decode, encode, WireMessage, WireSummary};
use disthill::worker::{
    r_stat, rho_from_t, RhoPolicy, RStats, SummaryPayload, TransmissionMode, WorkerSummary,
};
use proptest::prelude::*;

fn shard_values() -> impl Strategy<Value = Vec<f64>> {
    // positive, spread over many magnitudes
    proptest::collection::vec(
        (-300.0f64..300.0).prop_map(|e| (e / 25.0).exp() * 1.7),
        4..200,
    )
}

proptest! {
    #[test]
    fn moment_inequalities_hold(values in shard_values(), k_frac in 0.01f64..0.99) {
        let n = values.len();
        let shard = Shard::new(1, values).unwrap();
        let k = ((n as f64 * k_frac) as usize).clamp(1, n - 1);
        let stats = RStats::from_shard(&shard, k).unwrap();
        // slack for rounding: the inequalities are exact in real arithmetic
        let scale = stats.r2.max(1e-300);
        prop_assert!(stats.r2 - stats.r1 * stats.r1 >= -1e-12 * scale);
        prop_assert!(stats.r1 * stats.r3 - stats.r2 * stats.r2 >= -1e-12 * scale * scale);
        prop_assert!(stats.r1 >= 0.0 && stats.r2 >= 0.0 && stats.r3 >= 0.0);
    }

    #[test]
    fn r_stat_scale_invariance_under_lossless_scaling(
        values in shard_values(),
        exp in -40i32..40,
    ) {
        let n = values.len();
        let c = (2.0f64).powi(exp);
        let scaled = Shard::new(1, values.iter().map(|v| v * c).collect()).unwrap();
        let shard = Shard::new(1, values).unwrap();
        let k = n / 2;
        for alpha in 1..=3 {
            let a = r_stat(&shard, k, alpha).unwrap();
            let b = r_stat(&scaled, k, alpha).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rho_map_is_nonpositive(t in -1e6f64..1e6) {
        prop_assume!(t != 3.0);
        prop_assert!(rho_from_t(t).unwrap() <= 0.0);
    }

    #[test]
    fn fmt17_round_trips_all_finite_doubles(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let back = parse17(&fmt17(x)).unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn wire_messages_round_trip(
        machine_id in 1usize..1000,
        mode_idx in 0usize..4,
        raw in proptest::collection::vec(any::<u64>(), 6),
        k_n in 1usize..500,
        extra in 1usize..500,
        tau in 0.0f64..1.5,
    ) {
        let mode = [
            TransmissionMode::FiveStat,
            TransmissionMode::SixStat,
            TransmissionMode::ThreeStat,
            TransmissionMode::OneStat,
        ][mode_idx];
        let stats: Vec<f64> = raw
            .iter()
            .take(mode.scalar_budget())
            .map(|&b| {
                let x = f64::from_bits(b);
                if x.is_finite() { x } else { 1.25 }
            })
            .collect();
        let summary = WireMessage::Summary(WireSummary { machine_id, mode, stats });
        let line = encode(&summary).unwrap();
        prop_assert_eq!(decode(&line).unwrap(), summary);

        let task = WireMessage::Task {
            machine_id,
            mode,
            k_n,
            k_rho: k_n + extra,
            tau,
            policy: RhoPolicy::Strict,
        };
        let line = encode(&task).unwrap();
        prop_assert_eq!(decode(&line).unwrap(), task);
    }

    #[test]
    fn summary_lines_respect_their_budget(
        machine_id in 1usize..50,
        mode_idx in 0usize..4,
        fill in any::<f64>(),
    ) {
        prop_assume!(fill.is_finite());
        let mode = [
            TransmissionMode::FiveStat,
            TransmissionMode::SixStat,
            TransmissionMode::ThreeStat,
            TransmissionMode::OneStat,
        ][mode_idx];
        let stats = vec![fill; mode.scalar_budget()];
        let line = encode(&WireMessage::Summary(WireSummary { machine_id, mode, stats })).unwrap();
        // "SUMMARY machine_id=.. mode=.." + exactly budget statistic fields
        let fields = line.split(' ').count();
        prop_assert_eq!(fields, 3 + mode.scalar_budget());
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        r1s in proptest::collection::vec(0.01f64..10.0, 2..12),
        seed in any::<u64>(),
    ) {
        let summaries: Vec<WorkerSummary> = r1s
            .iter()
            .enumerate()
            .map(|(i, &r1)| WorkerSummary {
                machine_id: i + 1,
                n_j: 100,
                payload: SummaryPayload::FiveStat {
                    k_n: 10,
                    k_rho: 50,
                    r1_kn: r1,
                    r2_kn: 2.0 * r1 * r1,
                    r1_krho: r1,
                    r2_krho: 2.1 * r1 * r1,
                    r3_krho: 6.6 * r1 * r1 * r1,
                },
            })
            .collect();
        let base = aggregate(&summaries, Weighting::EqualMean).unwrap();
        let mut shuffled = summaries.clone();
        // cheap deterministic shuffle driven by the seed
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s as usize) % (i + 1));
        }
        prop_assert_eq!(aggregate(&shuffled, Weighting::EqualMean).unwrap(), base);
    }
}
