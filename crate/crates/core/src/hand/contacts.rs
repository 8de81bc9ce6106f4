use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Transform3;
use crate::hand::kinematics::HandKinematics;

/// A candidate contact point on the hand surface, in the link-local frame.
#[derive(Debug, Clone)]
pub struct ContactCandidate {
    pub link: usize,
    pub point: Vector3<f64>,
    /// Outward surface normal in the link frame.
    pub normal: Vector3<f64>,
}

/// All candidate contacts of a hand, generated per the hand's contact groups.
#[derive(Debug, Clone)]
pub struct ContactCandidateSet {
    pub candidates: Vec<ContactCandidate>,
}

impl ContactCandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Candidate count on the named link.
    pub fn count_on_link(&self, link: usize) -> usize {
        self.candidates.iter().filter(|c| c.link == link).count()
    }

    /// World-frame position and outward normal of candidate `i` under the
    /// given link transforms.
    pub fn world(&self, i: usize, link_tf: &[Transform3]) -> (Vector3<f64>, Vector3<f64>) {
        let c = &self.candidates[i];
        let tf = &link_tf[c.link];
        (tf.apply(c.point), tf.apply_vector(c.normal))
    }
}

/// Generate contact candidates for a hand. Fingertip groups draw directions
/// uniformly from the hemisphere around the tip axis and project them onto
/// the tip surface; surface groups sample uniformly by area.
pub fn generate_contact_candidates(kin: &HandKinematics, seed: u64) -> Result<ContactCandidateSet> {
    let mut candidates = Vec::new();
    for (g_idx, group) in kin.contact_groups.iter().enumerate() {
        for name in &group.links {
            let link = kin
                .link_index(name)
                .ok_or_else(|| Error::Parse(format!("contact group references unknown link `{name}`")))?;
            let link_seed = seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add((g_idx as u64) << 32)
                .wrapping_add(link as u64);
            match group.kind.as_str() {
                "surface" => {
                    let cloud = kin.links[link]
                        .mesh
                        .sample_surface(group.count_per_link, link_seed)?;
                    for p in cloud.points {
                        let (q, tri) = kin.links[link].sdf.nearest_point(p);
                        let _ = q;
                        candidates.push(ContactCandidate {
                            link,
                            point: p,
                            normal: kin.links[link].mesh.triangle_normal(tri),
                        });
                    }
                }
                "tip" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(link_seed);
                    let center = kin.links[link].sphere_center;
                    let axis = crate::hand::kinematics::tip_axis_local();
                    for _ in 0..group.count_per_link {
                        // Uniform on the hemisphere with d . axis >= 0.
                        let u: f64 = rng.random();
                        let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                        let s = (1.0 - u * u).sqrt();
                        // Local hemisphere frame: axis is +y.
                        let d = Vector3::new(s * phi.cos(), u, s * phi.sin());
                        debug_assert!(d.dot(&axis) >= 0.0);
                        let far = center + d * 1.0;
                        let (p, tri) = kin.links[link].sdf.nearest_point(far);
                        candidates.push(ContactCandidate {
                            link,
                            point: p,
                            normal: kin.links[link].mesh.triangle_normal(tri),
                        });
                    }
                }
                other => {
                    return Err(Error::Parse(format!("unknown contact group kind `{other}`")))
                }
            }
        }
    }
    Ok(ContactCandidateSet { candidates })
}

/// Indices of the currently selected contact candidates; distinct and valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactSelection {
    pub indices: Vec<usize>,
}

impl ContactSelection {
    pub fn new(indices: Vec<usize>, candidate_count: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &i in &indices {
            if i >= candidate_count {
                return Err(Error::InvalidArgument(format!(
                    "contact index {i} out of range ({candidate_count} candidates)"
                )));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate contact index {i}"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// Uniform sample of `k` distinct indices.
    pub fn sample(k: usize, candidate_count: usize, rng: &mut impl Rng) -> Result<Self> {
        if k > candidate_count {
            return Err(Error::InvalidArgument(format!(
                "cannot select {k} of {candidate_count} candidates"
            )));
        }
        let mut pool: Vec<usize> = (0..candidate_count).collect();
        let mut indices = Vec::with_capacity(k);
        for _ in 0..k {
            let j = rng.random_range(0..pool.len());
            indices.push(pool.swap_remove(j));
        }
        Ok(Self { indices })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::builtin_hand;

    #[test]
    fn allegro_candidate_counts() {
        let kin = builtin_hand("allegro").unwrap();
        let set = generate_contact_candidates(&kin, 7).unwrap();
        assert_eq!(set.len(), 688);
        for tip in ["index_tip", "middle_tip", "ring_tip", "thumb_tip"] {
            assert_eq!(set.count_on_link(kin.link_index(tip).unwrap()), 96);
        }
        assert_eq!(set.count_on_link(kin.link_index("palm").unwrap()), 128);
        assert_eq!(set.count_on_link(kin.link_index("index_prox").unwrap()), 16);
    }

    #[test]
    fn leap_candidate_counts() {
        let kin = builtin_hand("leap").unwrap();
        let set = generate_contact_candidates(&kin, 7).unwrap();
        for tip in ["f1_tip", "f2_tip", "f3_tip", "thumb_tip"] {
            assert_eq!(set.count_on_link(kin.link_index(tip).unwrap()), 24);
        }
        assert_eq!(set.count_on_link(kin.link_index("palm").unwrap()), 128);
        assert_eq!(set.count_on_link(kin.link_index("f1_dip").unwrap()), 4);
        assert_eq!(set.len(), 4 * 24 + 3 * 16 + 3 * 4 + 2 * 16 + 128);
    }

    #[test]
    fn unknown_profile_errors() {
        assert!(matches!(
            builtin_hand("shadow"),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn candidates_lie_on_link_surfaces() {
        let kin = builtin_hand("allegro").unwrap();
        let set = generate_contact_candidates(&kin, 11).unwrap();
        for c in &set.candidates {
            let (d, _) = kin.links[c.link].sdf.signed_distance(c.point);
            assert!(d.abs() <= 1e-5, "link {} d={d}", kin.links[c.link].name);
            assert!((c.normal.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn candidates_deterministic_per_seed() {
        let kin = builtin_hand("allegro").unwrap();
        let a = generate_contact_candidates(&kin, 3).unwrap();
        let b = generate_contact_candidates(&kin, 3).unwrap();
        assert_eq!(a.candidates.len(), b.candidates.len());
        for (x, y) in a.candidates.iter().zip(&b.candidates) {
            assert_eq!(x.point, y.point);
        }
    }

    #[test]
    fn selection_rejects_duplicates_and_out_of_range() {
        assert!(ContactSelection::new(vec![0, 1, 1], 10).is_err());
        assert!(ContactSelection::new(vec![0, 10], 10).is_err());
        assert!(ContactSelection::new(vec![0, 9], 10).is_ok());
    }
}
