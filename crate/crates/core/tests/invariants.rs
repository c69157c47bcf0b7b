mod support;

use std::collections::BTreeSet;

use itertools::Itertools;
use proptest::prelude::*;

use support::*;
use toolcorpus::augment::{convert_output, parse_output, shuffle, FormatId, ShuffleSpec};
use toolcorpus::fc_match::{match_call_set, MatchPolicy};
use toolcorpus::mixture::{dedup, shard, ShardSpec, SourceTag, TaggedRecord};
use toolcorpus::model::Trajectory;

fn sorted_debug<T: std::fmt::Debug>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|x| format!("{x:?}")).sorted().collect()
}

fn query_corpus(queries: &[String]) -> Vec<Trajectory> {
    queries.iter().enumerate().map(|(i, q)| Trajectory::new(format!("q{i}"), q.clone())).collect()
}

fn query_strategy() -> impl Strategy<Value = Vec<String>> {
    let word = prop::sample::select(&WORDS[..12]);
    let query = prop::collection::vec(word, 0..7).prop_map(|w| w.join(" "));
    prop::collection::vec(query, 0..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_format_round_trips(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let x = g.step_output();
        for f in FormatId::ALL {
            let text = convert_output(&x, f);
            let back = parse_output(&text, f);
            prop_assert_eq!(back.as_ref(), Ok(&x), "{}: {}", f, text);
        }
    }

    #[test]
    fn shuffle_keeps_every_element(seed in any::<u64>(), shuffle_seed in any::<u64>()) {
        let t = clean_trajectory(&mut Gen::new(seed), "t");
        let (s, order) = shuffle(&t, &ShuffleSpec::all(shuffle_seed));
        prop_assert_eq!(sorted_debug(t.tools.iter().map(|x| &x.name)), sorted_debug(s.tools.iter().map(|x| &x.name)));
        for tool in &s.tools {
            let before = t.tools.iter().find(|x| x.name == tool.name).unwrap();
            prop_assert_eq!(sorted_debug(&before.parameters), sorted_debug(&tool.parameters));
            prop_assert_eq!(sorted_debug(before.field_order), sorted_debug(tool.field_order));
        }
        for (a, b) in t.steps.iter().zip(&s.steps) {
            prop_assert_eq!(sorted_debug(&a.tool_calls), sorted_debug(&b.tool_calls));
            prop_assert_eq!(&a.thought, &b.thought);
        }
        prop_assert_eq!(order.0.iter().collect::<BTreeSet<_>>().len(), 6);
        prop_assert_eq!(shuffle(&t, &ShuffleSpec::all(shuffle_seed)), (s, order));
    }

    #[test]
    fn set_match_ignores_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let t = clean_trajectory(&mut Gen::new(seed), "t");
        let calls: Vec<_> = t.steps.iter().flat_map(|s| s.tool_calls.clone()).collect();
        let mut permuted = calls.clone();
        toolcorpus::rng::SplitMix64::new(perm_seed).shuffle(&mut permuted);
        let policy = MatchPolicy::default();
        prop_assert!(match_call_set(&calls, &calls, &t.tools, &policy).matched);
        prop_assert!(match_call_set(&permuted, &calls, &t.tools, &policy).matched);
        if calls.len() <= 6 {
            prop_assert!(oracle_set_match(&permuted, &calls));
        }
        if !calls.is_empty() {
            prop_assert!(!match_call_set(&permuted[1..], &calls, &t.tools, &policy).matched);
        }
    }

    #[test]
    fn dedup_conserves_records(queries in query_strategy(), threshold in 0.05f64..=1.0, n in 1usize..4) {
        let corpus = query_corpus(&queries);
        let (kept, drops) = dedup(&corpus, threshold, n).unwrap();
        prop_assert_eq!(kept.len() + drops.len(), corpus.len());
        let kept_ids: BTreeSet<_> = kept.iter().map(|t| t.unique_trajectory_id.as_str()).collect();
        let all: BTreeSet<_> = kept_ids.iter().copied().chain(drops.iter().map(|d| d.dropped_id.as_str())).collect();
        prop_assert_eq!(all.len(), corpus.len());
        for d in &drops {
            prop_assert!(kept_ids.contains(d.kept_id.as_str()));
            prop_assert!(d.similarity >= threshold);
        }
        for (a, b) in kept.iter().tuple_combinations() {
            let sim = oracle_jaccard(&oracle_shingles(&a.query, n), &oracle_shingles(&b.query, n));
            prop_assert!(sim < threshold, "{:?} ~ {:?} = {}", a.query, b.query, sim);
        }
    }

    #[test]
    fn shards_partition_the_corpus(count in 0usize..60, workers in 1usize..6, base_seed in any::<u64>(), block in 1usize..4) {
        let corpus: Vec<TaggedRecord> = (0..count)
            .map(|i| TaggedRecord {
                source: SourceTag::ALL[i % 3],
                record: Trajectory::new(format!("r{i}"), format!("query {i}")),
            })
            .collect();
        let spec = ShardSpec { num_workers: workers, base_seed, interleave_block: block };
        let shards = shard(&corpus, &spec).unwrap();
        prop_assert_eq!(shards.len(), workers);
        let mut seen: Vec<&str> = Vec::new();
        for (w, s) in shards.iter().enumerate() {
            for r in s {
                prop_assert_eq!(spec.worker_of(&r.record.unique_trajectory_id), w);
                seen.push(&r.record.unique_trajectory_id);
            }
        }
        seen.sort();
        let mut ids: Vec<&str> = corpus.iter().map(|r| r.record.unique_trajectory_id.as_str()).collect();
        ids.sort();
        prop_assert_eq!(seen, ids);
        prop_assert_eq!(shard(&corpus, &spec).unwrap(), shards);
    }
}
