use nsc_core::quantize::{image_mse, image_ssim, kmeans_palette, palette_distance, remap, Distance, Image, KMeansConfig, SSIM_SIGMA, SSIM_WINDOW};
use nsc_core::rng::Rng;

fn cfg(k: usize) -> KMeansConfig {
    KMeansConfig {
        k,
        seed: 4,
        ..KMeansConfig::default()
    }
}

#[test]
fn uniform_image_single_centroid() {
    let img = Image::filled(9, 5, [10, 200, 30]);
    let p = kmeans_palette(&img, &cfg(1)).unwrap();
    assert_eq!(p.colors(), vec![[10, 200, 30]]);
    let p3 = kmeans_palette(&img, &cfg(3)).unwrap();
    assert_eq!(p3.centroids.len(), 1);
    let q = remap(&img, &p.centroids, &Distance::Exact).unwrap();
    assert_eq!(q, img);
}

#[test]
fn two_color_image() {
    let img = Image::from_fn(8, 8, |x, _| if x < 3 { [255, 0, 0] } else { [0, 0, 255] });
    let mut colors = kmeans_palette(&img, &cfg(2)).unwrap().colors();
    colors.sort();
    assert_eq!(colors, vec![[0, 0, 255], [255, 0, 0]]);
}

#[test]
fn lloyd_objective_is_monotone_and_palette_bounded() {
    let img = Image::synthetic(48, 40, 8);
    for k in [5, 10, 15] {
        let p = kmeans_palette(&img, &cfg(k)).unwrap();
        for w in p.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0], "k {k}: {} -> {}", w[0], w[1]);
        }
        assert!(p.iterations <= 40);
        let q = remap(&img, &p.centroids, &Distance::Exact).unwrap();
        assert!(q.distinct_colors() <= k);
        let again = remap(&q, &p.centroids, &Distance::Exact).unwrap();
        assert_eq!(again, q);
    }
}

#[test]
fn parallel_assignment_matches_serial() {
    let img = Image::synthetic(64, 64, 1);
    let a = kmeans_palette(&img, &cfg(6)).unwrap();
    let b = kmeans_palette(&img, &KMeansConfig { jobs: 4, ..cfg(6) }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ties_go_to_lower_index() {
    let c = [[0.25; 3], [0.75; 3]];
    assert_eq!(Distance::Exact.nearest(&[0.5; 3], &c), 0);
    assert_eq!(Distance::Exact.nearest(&[0.5; 3], &[c[1], c[0]]), 0);
    let k1 = remap(&Image::synthetic(10, 10, 2), &[[0.5, 0.2, 0.1]], &Distance::Exact).unwrap();
    assert_eq!(k1.distinct_colors(), 1);
}

#[test]
fn mse_oracle() {
    let a = Image::synthetic(17, 11, 3);
    assert_eq!(image_mse(&a, &a).unwrap(), 0.0);
    let plus = Image::new(17, 11, a.data().iter().map(|&v| v.min(245) + 10).collect()).unwrap();
    let lo = Image::new(17, 11, a.data().iter().map(|&v| v.min(245)).collect()).unwrap();
    assert_eq!(image_mse(&lo, &plus).unwrap(), 100.0);
    let mut rng = Rng::new(5);
    let b = Image::new(17, 11, (0..17 * 11 * 3).map(|_| rng.below(256) as u8).collect()).unwrap();
    let mut naive = 0.0;
    for y in 0..11 {
        for x in 0..17 {
            for c in 0..3 {
                let i = (y * 17 + x) * 3 + c;
                naive += (a.data()[i] as f64 - b.data()[i] as f64).powi(2);
            }
        }
    }
    assert_eq!(image_mse(&a, &b).unwrap(), naive / (17.0 * 11.0 * 3.0));
    assert!(image_mse(&a, &Image::filled(3, 3, [0; 3])).is_err());
}

#[test]
fn ssim_properties() {
    let a = Image::synthetic(32, 24, 6);
    assert_eq!(image_ssim(&a, &a).unwrap(), 1.0);
    let inv = Image::new(32, 24, a.data().iter().map(|&v| 255 - v).collect()).unwrap();
    assert!(image_ssim(&a, &inv).unwrap() < 1.0);
    assert!(image_ssim(&Image::filled(6, 6, [0; 3]), &Image::filled(6, 6, [0; 3])).is_err());
    assert_eq!((SSIM_WINDOW, SSIM_SIGMA), (7, 1.5));
}

#[test]
fn ssim_of_constant_images_matches_closed_form() {
    let a = Image::filled(20, 20, [100, 100, 100]);
    let b = Image::filled(20, 20, [101, 101, 101]);
    let (mx, my) = (100.0f64, 101.0f64);
    let c1 = (0.01f64 * 255.0).powi(2);
    let want = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
    assert!((image_ssim(&a, &b).unwrap() - want).abs() < 1e-10);
}

#[test]
fn palette_matching() {
    let a = [[0.1, 0.2, 0.3], [0.9, 0.8, 0.7]];
    let b = [[0.9, 0.81, 0.7], [0.1, 0.2, 0.33]];
    assert!((palette_distance(&a, &b).unwrap() - 0.03).abs() < 1e-12);
    assert!(palette_distance(&a, &b[..1]).is_none());
}
