//! Property tests for the structural invariants the pipeline leans on:
//! conservation under renormalized flow, ranking stability under shift
//! rescaling, search monotonicity in its budgets, and metric bounds.

use chrono::NaiveDate;
use curvflow::curvature::{CurvatureKind, CurvatureOptions};
use curvflow::entity::{EdgeKey, EntityId};
use curvflow::flow::{simulate_flow_collapsed, FlowConfig};
use curvflow::graph::WeightedGraph;
use curvflow::market::{FeatureVector, MarketFrame};
use curvflow::rca::{backward_search, RcaParams, SearchResult, TargetSet};
use curvflow::scoring::{risk_exposures, ScoreBoard, ScoreForm};
use curvflow::stress::{inject_shock, ndcg_at_10, quintile_gains, ShockSpec};
use curvflow_testkit::fixtures::{barbell, grid, node_names};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn build(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> WeightedGraph<f64> {
    let names = node_names(n);
    WeightedGraph::from_edges(
        names.iter().map(|s| EntityId::new(s)),
        edges
            .iter()
            .zip(weights)
            .map(|(&(u, v), &w)| (EntityId::new(&names[u]), EntityId::new(&names[v]), w)),
    )
    .expect("fixture graphs are valid")
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 2).expect("valid date")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renormalized_flow_conserves_total_weight(
        weights in proptest::collection::vec(0.3f64..1.5, 7),
        eta in 0.002f64..0.01,
    ) {
        let graph = build(6, &barbell(3), &weights);
        let cfg = FlowConfig {
            eta,
            iterations: 10,
            renormalize: true,
            kind: CurvatureKind::Forman,
            options: CurvatureOptions::default(),
            recompute: true,
        };
        let trace = simulate_flow_collapsed(&graph, None, &cfg).expect("flow runs");
        let total0: f64 = weights.iter().sum();
        for state in &trace.states {
            let total: f64 = state.weights.values().sum();
            prop_assert!(((total - total0) / total0).abs() <= 1e-9);
        }
    }

    #[test]
    fn ranking_is_invariant_under_exact_positive_delta_scaling(
        deltas in proptest::collection::vec(-0.5f64..0.5, 7),
        r_hats in proptest::collection::vec(-0.05f64..0.05, 6),
        alpha in 0.0f64..=1.0,
        exponent in -8i32..=8,
    ) {
        let edges = barbell(3);
        let names = node_names(6);
        let graph = build(6, &edges, &vec![1.0; edges.len()]);
        let assets: Vec<EntityId> = names.iter().map(|s| EntityId::new(s)).collect();
        let forecasts: BTreeMap<_, _> = assets
            .iter()
            .zip(&r_hats)
            .map(|(a, &v)| {
                (a.clone(), curvflow::scoring::ReturnForecast {
                    asset: a.clone(),
                    horizon: 5,
                    value: v,
                })
            })
            .collect();
        let delta_map = |scale: f64| -> BTreeMap<EdgeKey, f64> {
            edges
                .iter()
                .zip(&deltas)
                .map(|(&(u, v), &d)| {
                    (
                        EdgeKey::new(EntityId::new(&names[u]), EntityId::new(&names[v]))
                            .expect("distinct endpoints"),
                        scale * d,
                    )
                })
                .collect()
        };
        // Powers of two rescale exactly, so the normalized exposures and
        // hence the board order cannot move at all.
        let c = (exponent as f64).exp2();
        let base = risk_exposures(&graph, &delta_map(1.0), &assets).expect("exposures");
        let scaled = risk_exposures(&graph, &delta_map(c), &assets).expect("exposures");
        let board_a = ScoreBoard::build(day(), ScoreForm::Alpha { alpha }, &forecasts, &base)
            .expect("board builds");
        let board_b = ScoreBoard::build(day(), ScoreForm::Alpha { alpha }, &forecasts, &scaled)
            .expect("board builds");
        prop_assert_eq!(board_a.ranking(), board_b.ranking());
    }

    #[test]
    fn search_never_worsens_with_a_larger_hop_budget(
        deltas in proptest::collection::vec(-0.3f64..0.3, 12),
        target_bits in proptest::collection::vec(proptest::bool::weighted(0.3), 9),
        h_max in 1usize..5,
    ) {
        let edges = grid(3, 3);
        let names = node_names(9);
        let graph = build(9, &edges, &vec![1.0; edges.len()]);
        let delta: BTreeMap<EdgeKey, f64> = edges
            .iter()
            .zip(&deltas)
            .map(|(&(u, v), &d)| {
                (
                    EdgeKey::new(EntityId::new(&names[u]), EntityId::new(&names[v]))
                        .expect("distinct endpoints"),
                    d,
                )
            })
            .collect();
        let targets = TargetSet {
            perturbed: Default::default(),
            unstable: target_bits
                .iter()
                .enumerate()
                .filter(|(_, &t)| t)
                .map(|(i, _)| EntityId::new(&names[i]))
                .collect(),
        };
        let start = EntityId::new(&names[0]);
        let run = |h: usize| {
            backward_search(&graph, &delta, &start, &targets, &RcaParams {
                theta: -0.05,
                h_max: h,
                epsilon: 0.01,
            })
            .expect("search runs")
        };
        let narrow = run(h_max);
        let wide = run(h_max + 1);
        if let SearchResult::Found(p) = &narrow {
            match &wide {
                SearchResult::Found(q) => prop_assert!(q.cumulative >= p.cumulative),
                SearchResult::NotFound { .. } => {
                    prop_assert!(false, "wider budget lost the path")
                }
            }
        }
    }

    #[test]
    fn search_never_worsens_with_a_looser_threshold(
        deltas in proptest::collection::vec(-0.3f64..0.3, 12),
        target_bits in proptest::collection::vec(proptest::bool::weighted(0.3), 9),
    ) {
        let edges = grid(3, 3);
        let names = node_names(9);
        let graph = build(9, &edges, &vec![1.0; edges.len()]);
        let delta: BTreeMap<EdgeKey, f64> = edges
            .iter()
            .zip(&deltas)
            .map(|(&(u, v), &d)| {
                (
                    EdgeKey::new(EntityId::new(&names[u]), EntityId::new(&names[v]))
                        .expect("distinct endpoints"),
                    d,
                )
            })
            .collect();
        let targets = TargetSet {
            perturbed: Default::default(),
            unstable: target_bits
                .iter()
                .enumerate()
                .filter(|(_, &t)| t)
                .map(|(i, _)| EntityId::new(&names[i]))
                .collect(),
        };
        let start = EntityId::new(&names[0]);
        let run = |theta: f64| {
            backward_search(&graph, &delta, &start, &targets, &RcaParams {
                theta,
                h_max: 6,
                epsilon: 0.01,
            })
            .expect("search runs")
        };
        let strict = run(-0.1);
        let loose = run(-0.02);
        if let SearchResult::Found(p) = &strict {
            match &loose {
                SearchResult::Found(q) => prop_assert!(q.cumulative >= p.cumulative),
                SearchResult::NotFound { .. } => {
                    prop_assert!(false, "looser threshold lost the path")
                }
            }
        }
    }

    #[test]
    fn quintile_gains_follow_the_return_order(
        returns in proptest::collection::vec(-0.2f64..0.2, 3..20),
    ) {
        let map: BTreeMap<EntityId, f64> = returns
            .iter()
            .enumerate()
            .map(|(i, &r)| (EntityId::new(format!("a{i:02}")), r))
            .collect();
        let gains = quintile_gains(&map);
        prop_assert_eq!(gains.len(), map.len());
        let mut ranked: Vec<(&EntityId, f64)> = map.iter().map(|(a, &r)| (a, r)).collect();
        ranked.sort_by(|(ia, ra), (ib, rb)| {
            rb.partial_cmp(ra).expect("finite").then_with(|| ia.cmp(ib))
        });
        let mut previous = 4.0;
        for (asset, _) in ranked {
            let g = gains[asset];
            prop_assert!((0.0..=4.0).contains(&g));
            prop_assert!(g <= previous, "gains must not increase down the ranking");
            previous = g;
        }
    }

    #[test]
    fn ndcg_is_bounded_and_tops_out_on_the_ideal_order(
        gains in proptest::collection::vec(0.0f64..4.0, 5..25),
    ) {
        let map: BTreeMap<EntityId, f64> = gains
            .iter()
            .enumerate()
            .map(|(i, &g)| (EntityId::new(format!("a{i:02}")), g))
            .collect();
        let mut ideal: Vec<EntityId> = map.keys().cloned().collect();
        ideal.sort_by(|a, b| {
            map[b].partial_cmp(&map[a]).expect("finite").then_with(|| a.cmp(b))
        });
        let best = ndcg_at_10(&ideal, &map).expect("ranking is nonempty");
        prop_assert!(best == 1.0 || map.values().all(|&g| g == 0.0));

        let mut worst: Vec<EntityId> = ideal.clone();
        worst.reverse();
        let low = ndcg_at_10(&worst, &map).expect("ranking is nonempty");
        prop_assert!((0.0..=1.0 + 1e-12).contains(&low));
        prop_assert!(low <= best);
    }

    #[test]
    fn shocks_scale_volatility_and_clamp_sentiment(
        vols in proptest::collection::vec(0.0f64..0.1, 4),
        sentiments in proptest::collection::vec(-1.0f64..1.0, 4),
        multiplier in 1.5f64..5.0,
        shift in -1.0f64..0.0,
    ) {
        let assets: Vec<EntityId> = (0..4).map(|i| EntityId::new(format!("a{i}"))).collect();
        let frame = MarketFrame {
            date: day(),
            features: assets
                .iter()
                .zip(vols.iter().zip(&sentiments))
                .map(|(a, (&v, &s))| {
                    (a.clone(), FeatureVector {
                        log_return: 0.01,
                        realised_vol: v,
                        volume_z: 0.0,
                        sentiment: s,
                    })
                })
                .collect(),
        };
        let spec = ShockSpec {
            targets: [assets[1].clone()].into(),
            vol_multiplier: multiplier,
            sentiment_delta: shift,
        };
        let shocked = inject_shock(std::slice::from_ref(&frame), &spec).expect("shock applies");
        prop_assert_eq!(shocked.len(), 1);
        for (asset, fv) in &shocked[0].features {
            let before = &frame.features[asset];
            if *asset == assets[1] {
                prop_assert_eq!(fv.realised_vol, before.realised_vol * multiplier);
                let expected = (before.sentiment + shift).clamp(-1.0, 1.0);
                prop_assert_eq!(fv.sentiment, expected);
                prop_assert!((-1.0..=1.0).contains(&fv.sentiment));
            } else {
                prop_assert_eq!(fv, before);
            }
        }
    }
}
