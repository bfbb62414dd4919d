#![allow(dead_code)]

use lbf_core::topology::{NodeId, Topology};
use lbf_core::wire::{
    DataBackPacket, LevelBackPacket, LevelBuildingPacket, Packet, QueryPacket, SENTINEL_LEVEL,
};
use proptest::prelude::*;

fn node() -> impl Strategy<Value = NodeId> {
    any::<u16>().prop_map(NodeId)
}

/// Any packet the encoder accepts.
pub fn valid_packet() -> impl Strategy<Value = Packet> {
    let lb = (any::<u8>(), node(), any::<u16>()).prop_map(|(level, source_id, seq_num)| {
        Packet::LevelBuilding(LevelBuildingPacket {
            level,
            source_id,
            seq_num,
        })
    });
    let back = (1..SENTINEL_LEVEL)
        .prop_flat_map(|level| (Just(level), 0..=level))
        .prop_flat_map(|(level, ttl)| (Just(level), Just(ttl), any::<u16>(), node(), node()))
        .prop_map(|(level, ttl, seq_num, target_id, source_id)| {
            Packet::LevelBack(LevelBackPacket {
                ttl,
                level,
                target_id,
                source_id,
                seq_num,
            })
        });
    let query = (any::<u8>(), any::<u8>(), any::<u16>(), node(), node()).prop_map(
        |(hop_count, ttl, seq_num, target_id, source_id)| {
            Packet::Query(QueryPacket {
                hop_count,
                ttl,
                seq_num,
                target_id,
                source_id,
            })
        },
    );
    let data = (
        any::<u8>(),
        any::<u16>(),
        node(),
        node(),
        proptest::collection::vec(any::<u8>(), 0..=255),
    )
        .prop_map(|(ttl, seq_num, target_id, source_id, data)| {
            Packet::DataBack(DataBackPacket {
                ttl,
                seq_num,
                target_id,
                source_id,
                data,
            })
        });
    prop_oneof![lb, back, query, data]
}

/// Random geometric topology small enough for exhaustive checks.
pub fn random_topology() -> impl Strategy<Value = Topology> {
    (2usize..60, 100.0f64..600.0, any::<u64>()).prop_map(|(n, side, seed)| {
        let cfg = lbf_core::ScenarioConfig::new(n, side).with_seed(seed);
        Topology::generate(&cfg).expect("valid config")
    })
}

/// Arbitrary graph given as an edge list over `n` nodes, sink 0.
pub fn random_graph() -> impl Strategy<Value = Topology> {
    (2usize..40).prop_flat_map(|n| {
        let edge = (0..n as u16, 0..n as u16);
        proptest::collection::vec(edge, 0..(3 * n)).prop_map(move |edges| {
            let edges: Vec<(u16, u16)> = edges.into_iter().filter(|(a, b)| a != b).collect();
            Topology::from_edges(n, NodeId::SINK, &edges).expect("valid edges")
        })
    })
}
