//! One predict / weight / resample cycle of the ground-plane particle filter,
//! with the effective sample size before and after.
//!
//! cargo run --example particle_filter

use groundtrack::geometry::GroundPlane;
use groundtrack::particle_filter::{ObjectState, ParticleSet, TransitionParams};
use nalgebra::Vector3;

fn main() {
    let plane = GroundPlane::horizontal(0.0);
    let start = ObjectState::on_plane(Vector3::zeros(), Vector3::new(1.0, 0.5, 0.0), &plane);
    let particles = ParticleSet::init_gaussian(plane, &start, 2.0, 1000, 7).unwrap();
    println!("initial ESS {:.1}", particles.effective_sample_size());

    let predicted = particles.predict(&TransitionParams::for_extent(10.0));
    let mean = predicted.estimate_state();
    println!("predicted mean ({:.2}, {:.2})", mean.position.x, mean.position.y);

    // the object was actually observed at (1.5, 0.2)
    let seen = Vector3::new(1.5, 0.2, 0.0);
    let update = predicted.reweight(|s| Some((-(s.position - seen).norm_squared() / 2.0).exp()));
    let weighted = update.particles;
    let post = weighted.estimate_state();
    println!("after weighting: ESS {:.1}, mean ({:.2}, {:.2})", weighted.effective_sample_size(), post.position.x, post.position.y);

    let (resampled, did) = weighted.resample_if_needed(0.5, 99);
    println!("resampled: {did}, ESS {:.1}", resampled.effective_sample_size());
}
