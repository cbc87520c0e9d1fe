use covdet_core::solver_core::SolverState;
use covdet_core::solvers::{solve, NoObserver, SolverConfig};
use covdet_core::system_model::{simulate_received, InstanceConfig, SequenceType, SystemInstance};

fn main() {
    for seed in 0..6u64 {
        let icfg = InstanceConfig::homogeneous(3, 40, 5, 16, SequenceType::Qpsk, 4000 + seed);
        let inst = SystemInstance::generate(&icfg).unwrap();
        let mut rng = inst.channel_rng();
        let covs = simulate_received(&inst, 64, &mut rng).unwrap();
        let mut cd_objs = Vec::new();
        let mut as_objs = Vec::new();
        for perm in 0..4u64 {
            let mut scfg = SolverConfig::exact();
            scfg.seed = 7000 + perm;
            let mut st = SolverState::new(&inst, &covs);
            cd_objs.push(solve(&mut st, &scfg, &mut NoObserver).unwrap().final_objective);
            let mut scfg = SolverConfig::active_exact();
            scfg.seed = 7000 + perm;
            let mut st = SolverState::new(&inst, &covs);
            as_objs.push(solve(&mut st, &scfg, &mut NoObserver).unwrap().final_objective);
        }
        let spread = |v: &[f64]| {
            let mn = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            mx - mn
        };
        println!(
            "seed {seed}: cd perm spread {:.3e}   ascd perm spread {:.3e}   cd best {:.4}  ascd best {:.4}",
            spread(&cd_objs), spread(&as_objs),
            cd_objs.iter().cloned().fold(f64::INFINITY, f64::min),
            as_objs.iter().cloned().fold(f64::INFINITY, f64::min),
        );
    }
}
