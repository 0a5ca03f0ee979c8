use navimpress::features::{dense_frame, extract_frame_with, FeatureSet, MASK, MAX_PEDESTRIANS, PEDS};
use navimpress::geometry::PUBLIC_SPACE_RADIUS;
use navimpress::sim::default_warehouse;
use navimpress::{binarize, BinaryLabel, BlendShapeVector, Dimension, FrameObservation, GazeVec, Pose2D};
use proptest::prelude::*;

fn pose() -> impl Strategy<Value = Pose2D> {
    (-5.0f64..40.0, -5.0f64..30.0, -3.1f64..3.1).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
}

fn frame() -> impl Strategy<Value = FrameObservation> {
    (pose(), pose(), pose(), proptest::collection::vec(pose(), 0..14), proptest::collection::vec(0.0f64..1.0, 73)).prop_map(
        |(robot, user, goal, pedestrians, blend)| FrameObservation {
            t: 0.0,
            robot,
            user,
            gaze: GazeVec::forward(),
            blend: BlendShapeVector::new(blend).unwrap(),
            pedestrians,
            goal,
        },
    )
}

proptest! {
    #[test]
    fn crop_shape_does_not_depend_on_pose(f in frame(), side in 1.0f64..6.0) {
        let map = default_warehouse();
        let x = extract_frame_with(&f, &map, side).unwrap();
        prop_assert_eq!(x.crop_cells, map.crop_cells(side));
        prop_assert_eq!(x.occ.len(), x.crop_cells * x.crop_cells);
        prop_assert!(x.occ.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn pedestrian_slots_are_sorted_by_distance(f in frame()) {
        let d = dense_frame(&f).unwrap();
        let visible = f.pedestrians.iter().filter(|p| p.distance(&f.robot) <= PUBLIC_SPACE_RADIUS).count();
        let used = d[MASK].iter().filter(|&&m| m == 1.0).count();
        prop_assert_eq!(used, visible.min(MAX_PEDESTRIANS));
        let norms: Vec<f64> = (0..used).map(|k| d[PEDS.start + 3 * k].hypot(d[PEDS.start + 3 * k + 1])).collect();
        prop_assert!(norms.windows(2).all(|w| w[0] <= w[1]), "{:?}", norms);
        if let Some(first) = norms.first() {
            let nearest = f.pedestrians.iter().map(|p| p.distance(&f.robot)).fold(f64::INFINITY, f64::min);
            prop_assert!((first - nearest).abs() < 1e-9);
        }
        prop_assert!(d[PEDS.start + 3 * used..PEDS.end].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn combined_set_extends_the_facial_set(f in frame()) {
        let x = extract_frame_with(&f, &default_warehouse(), 3.0).unwrap();
        let facial = x.select(FeatureSet::FacialOnly);
        let nav = x.select(FeatureSet::NavOnly);
        let both = x.select(FeatureSet::NavPlusFacial);
        prop_assert_eq!(&both[..facial.len()], &facial[..]);
        prop_assert_eq!(both.len(), facial.len() + nav.len() - 3);
        // Gaze belongs to both families.
        prop_assert_eq!(&both[facial.len() - 3..], &nav[..]);
    }

    #[test]
    fn binarize_is_total_on_the_scale_and_monotone(r in any::<i64>()) {
        for d in Dimension::ALL {
            let got = binarize(r, d);
            prop_assert_eq!(got.is_ok(), (1..=5).contains(&r));
        }
        let low = |d, r| binarize(r, d).unwrap() == BinaryLabel::LowPerf;
        for r in 1..5 {
            prop_assert!(low(Dimension::Competence, r + 1) <= low(Dimension::Competence, r));
            prop_assert!(low(Dimension::Intention, r + 1) <= low(Dimension::Intention, r));
            prop_assert!(low(Dimension::Surprise, r + 1) >= low(Dimension::Surprise, r));
        }
    }
}
