use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use wpmec_core::config::SimConfig;
use wpmec_core::mtdrl::build_action_space;
use wpmec_core::slot;
use wpmec_core::world::{init_world, Point};

fn main() {
    let cfg = SimConfig { rng_seed: 7, ..SimConfig::default() }.validate().unwrap();
    let space = build_action_space(&cfg);
    // Orbit policy: always serve, per-UAV move-only argmin distance to its cluster centroid.
    let mut rng = ChaCha12Rng::seed_from_u64(500);
    let mut eta_sum = 0.0;
    for _ in 0..10 {
        let mut world = init_world(&cfg, &mut rng);
        let mut acc = 0.0;
        for _ in 0..cfg.slots_per_episode {
            slot::mobility_step(&mut world, &cfg, &mut rng);
            slot::schedule_devices(&mut world, false, &cfg);
            // cluster centroids
            let mut sums = vec![(0.0, 0.0, 0usize); world.uavs.len()];
            for d in &world.devices {
                let mut bi = 0; let mut bd = f64::INFINITY;
                for (i, u) in world.uavs.iter().enumerate() {
                    let d2 = u.pos.horizontal_dist2(&d.pos);
                    if d2 < bd { bd = d2; bi = i; }
                }
                sums[bi].0 += d.pos.x; sums[bi].1 += d.pos.y; sums[bi].2 += 1;
            }
            let cands: Vec<_> = world.uavs.iter().enumerate().map(|(i, u)| {
                let target = if sums[i].2 > 0 { Point::new(sums[i].0 / sums[i].2 as f64, sums[i].1 / sums[i].2 as f64) } else { world.laser_pos };
                let mut best = None; let mut bd = f64::INFINITY;
                for (a, act) in space.actions.iter().enumerate() {
                    if !act.serving || act.dir.is_none() { continue; } // move-only, always serve
                    let c = space.apply(a, u.pos, &cfg);
                    let d2 = c.pos.horizontal_dist2(&target);
                    if d2 < bd { bd = d2; best = Some(c); }
                }
                best.unwrap()
            }).collect();
            let plan = slot::build_plan(&world, &cands, true, &cfg);
            let (tau, inf) = slot::choose_tau(&plan, &cfg);
            let m = slot::execute_slot(&mut world, &cands, tau, inf, true, &cfg);
            acc += m.efficiency;
        }
        eta_sum += acc / cfg.slots_per_episode as f64;
    }
    println!("orbit always-serve policy eta {:.4e}", eta_sum / 10.0);
}
