//! Fixtures shared by the criterion benches.

use nfde_core::channel::simulate_snapshots;
use nfde_core::subspace::{sample_covariance, split_subspaces, SignalSubspace};
use nfde_core::{
    ArrayGeometry, ArrayResponse, ChannelModel, Correlation, Scenario, SnapshotMatrix, SourceLocation, SourceSpec,
};

/// 128-element λ/4 ULA at 15 GHz.
pub fn ula_response() -> ArrayResponse {
    ArrayResponse::with_default_model(ArrayGeometry::ula(128, 0.005).expect("geometry"), 0.02).expect("response")
}

/// 16×16 λ/2 UPA at 15 GHz.
pub fn upa_response() -> ArrayResponse {
    ArrayResponse::with_default_model(ArrayGeometry::upa(16, 16, 0.01).expect("geometry"), 0.02).expect("response")
}

pub fn three_sources(planar: bool) -> Vec<SourceLocation> {
    let psi = |d: f64| planar.then_some(d);
    vec![
        SourceLocation::from_degrees(-35.0, psi(10.0), 1.6),
        SourceLocation::from_degrees(5.0, psi(-5.0), 1.1),
        SourceLocation::from_degrees(40.0, psi(20.0), 2.2),
    ]
}

pub fn snapshots(response: ArrayResponse, snapshots: usize) -> SnapshotMatrix {
    let planar = response.geometry().is_planar();
    let sources = three_sources(planar).into_iter().map(|location| SourceSpec { location, snr_db: 20.0 }).collect();
    let channel = ChannelModel::Rician { kappa: 10.0, correlation: Correlation::Iid };
    simulate_snapshots(&Scenario::new(response, sources, snapshots, channel, 1)).expect("simulation")
}

pub fn subspaces(snap: &SnapshotMatrix, k: usize) -> SignalSubspace {
    split_subspaces(&sample_covariance(&snap.data).expect("covariance"), k).expect("eigen")
}
