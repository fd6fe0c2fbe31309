mod common;

use common::{grid, LiteralHeat};
use dsc::engine::{
    DscSystem, Link, MapError, PhaseContext, Probe, ReflectionMap, Schedule, ScheduledExcitation, Slot, Topology,
    TransferConnection, ZeroReflection,
};
use dsc::heat_model::{BoundaryCondition, HeatModel, HeatSimulation};
use dsc::state::FieldLayout;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chain(cells: usize) -> Topology {
    let layout = FieldLayout::new(cells, 2, 1);
    let mut links = vec![Link::Boundary { side: Slot::new(0, 0) }];
    for c in 0..cells - 1 {
        links.push(Link::Interface {
            a: Slot::new(c, 1),
            b: Slot::new(c + 1, 0),
        });
    }
    links.push(Link::Boundary {
        side: Slot::new(cells - 1, 1),
    });
    Topology::new(layout, links).unwrap()
}

/// Transmits straight through a cell with partial reflection.
struct Junction;

impl ReflectionMap for Junction {
    fn reflect(&self, cell: usize, ctx: &PhaseContext<'_>, out: &mut [f64]) -> Result<(), MapError> {
        let z = ctx.incident_cell(0, cell);
        out[0] = 0.8 * z[1] - 0.1 * z[0];
        out[1] = 0.8 * z[0] - 0.1 * z[1];
        Ok(())
    }
}

fn pulse_system(schedule: Schedule, cutoff: u64) -> DscSystem<TransferConnection, Junction> {
    let topo = chain(6);
    let mut exc = ScheduledExcitation::new(&topo);
    exc.set(&topo, 0, move |step, _, out| {
        if step < cutoff {
            out[0] += ((step as f64) * 0.7).sin() + 1.0;
        }
    })
    .unwrap();
    DscSystem::new(topo, TransferConnection { boundary_reflection: -0.5 }, Junction, 0.25, 2)
        .unwrap()
        .with_excitation(exc)
        .with_schedule(schedule)
}

fn node_probes() -> Vec<Probe> {
    (0..6)
        .flat_map(|cell| (0..2).map(move |face| Probe::Node { cell, face, component: 0 }))
        .collect()
}

#[test]
fn zero_maps_keep_zero_state() {
    let mut sys = DscSystem::new(chain(6), TransferConnection::default(), ZeroReflection, 1.0, 2).unwrap();
    let series = sys.run(20, &node_probes()).unwrap();
    assert!(series.iter().all(|s| s.samples.iter().all(|&(_, v)| v == 0.0)));
}

#[test]
fn probes_sample_on_staggered_grids() {
    let mut sys = pulse_system(Schedule::Parallel, u64::MAX);
    let probes = [
        Probe::Node { cell: 0, face: 0, component: 0 },
        Probe::Port { cell: 0, face: 0, component: 0 },
    ];
    let series = sys.run(4, &probes).unwrap();
    let node_t: Vec<f64> = series[0].samples.iter().map(|s| s.0).collect();
    let port_t: Vec<f64> = series[1].samples.iter().map(|s| s.0).collect();
    assert_eq!(node_t, [0.125, 0.375, 0.625, 0.875]);
    assert_eq!(port_t, [0.0, 0.25, 0.5, 0.75]);
}

#[test]
fn runs_are_bit_identical() {
    let a = pulse_system(Schedule::Parallel, u64::MAX).run(200, &node_probes()).unwrap();
    let b = pulse_system(Schedule::Parallel, u64::MAX).run(200, &node_probes()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn task_order_within_a_phase_does_not_matter() {
    let reference = pulse_system(Schedule::Sequential, u64::MAX).run(100, &node_probes()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let mut cells: Vec<usize> = (0..6).collect();
        let mut links: Vec<usize> = (0..7).collect();
        cells.shuffle(&mut rng);
        links.shuffle(&mut rng);
        let permuted = pulse_system(Schedule::Permuted { cells, links }, u64::MAX)
            .run(100, &node_probes())
            .unwrap();
        assert_eq!(permuted, reference);
    }
    let parallel = pulse_system(Schedule::Parallel, u64::MAX).run(100, &node_probes()).unwrap();
    assert_eq!(parallel, reference);
}

#[test]
fn truncated_excitation_leaves_the_past_alone() {
    let full = pulse_system(Schedule::Parallel, u64::MAX).run(60, &node_probes()).unwrap();
    for cutoff in [0u64, 7, 30] {
        let cut = pulse_system(Schedule::Parallel, cutoff).run(60, &node_probes()).unwrap();
        for (a, b) in full.iter().zip(&cut) {
            // the state at node time (k+½)τ depends on excitations up to step k
            assert_eq!(a.samples[..cutoff as usize], b.samples[..cutoff as usize]);
        }
        if cutoff > 0 {
            assert_ne!(full, cut);
        }
    }
}

#[test]
fn two_cell_heat_matches_direct_recurrence() {
    let mesh = grid(2, 1, 1, 0.0, 0);
    let model = HeatModel::with_default_step(&mesh).unwrap();
    let tau = model.tau();
    let temps = [1.0, 0.0];
    let mut sim = HeatSimulation::with_initial_temperatures(model, &temps).unwrap();
    let mut oracle = LiteralHeat::new(&mesh, &temps, tau);
    for _ in 0..3 {
        sim.step().unwrap();
        oracle.step();
        for (a, b) in sim.temperatures().iter().zip(oracle.temperatures()) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }
}

#[test]
fn distorted_heat_matches_direct_recurrence() {
    let mesh = grid(3, 2, 2, 0.3, 11);
    let model = HeatModel::with_default_step(&mesh).unwrap();
    let tau = model.tau();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let temps: Vec<f64> = (0..mesh.num_cells()).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut sim = HeatSimulation::with_initial_temperatures(model, &temps).unwrap();
    let mut oracle = LiteralHeat::new(&mesh, &temps, tau);
    for _ in 0..25 {
        sim.step().unwrap();
        oracle.step();
        let zn = sim.system().node_totals();
        let flat: Vec<f64> = oracle.zn.iter().flatten().flatten().copied().collect();
        for (a, b) in zn.iter().zip(&flat) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn uniform_temperature_is_steady() {
    let mesh = grid(4, 3, 1, 0.25, 3);
    let mut model = HeatModel::with_default_step(&mesh).unwrap();
    let links: Vec<usize> = model.boundary_links().map(|(id, _)| id).collect();
    for id in links {
        model
            .set_boundary(id, BoundaryCondition::FixedTemperature { value: 2.5, onset: 0.0 })
            .unwrap();
    }
    let mut sim = HeatSimulation::with_initial_temperatures(model, &vec![2.5; mesh.num_cells()]).unwrap();
    let probes: Vec<Probe> = (0..mesh.num_cells()).map(|cell| Probe::Node { cell, face: 0, component: 0 }).collect();
    let series = sim.system_mut().run(50, &probes).unwrap();
    for s in series {
        for (_, v) in s.samples {
            assert!((v - 5.0).abs() < 1e-13);
        }
    }
}
