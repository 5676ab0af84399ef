mod common;

use common::*;
use fundus_core::dataset::{load_manifest, Source};
use fundus_core::harness::{roundtrip_eval, roundtrip_one, RoundTripConfig, RowStatus};
use fundus_core::image::{crop_borders, CropBox, Image};
use fundus_core::io::{load_image, save_image, FileFormat};
use fundus_core::iqa::{psnr, ssim, SsimParams};
use fundus_core::resample::{downscale, upscale_lanczos, Algorithm, ResampleSpec};
use proptest::prelude::*;
use rand::Rng;

fn image_strategy(max: usize) -> impl Strategy<Value = Image> {
    (1..=max, 1..=max, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
        proptest::collection::vec(any::<u8>(), w * h * c)
            .prop_map(move |data| Image::from_u8(w, h, c, data).unwrap())
    })
}

fn algorithm_strategy() -> impl Strategy<Value = ResampleSpec> {
    prop_oneof![
        Just(ResampleSpec::new(Algorithm::Bilinear)),
        Just(ResampleSpec::new(Algorithm::Bicubic)),
        Just(ResampleSpec::new(Algorithm::Lanczos)),
        Just(ResampleSpec::new(Algorithm::Lanczos).with_lanczos_taps(6)),
        Just(ResampleSpec::new(Algorithm::Lanczos).with_lanczos_taps(8)),
        Just(ResampleSpec::new(Algorithm::Rdip)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn downscalers_match_direct_summation(img in image_strategy(20), spec in algorithm_strategy(), s in 2u32..6) {
        let got = downscale(&img, &spec.clone().with_scale(s)).unwrap();
        let want = oracle_downscale(&img, spec.algorithm, s as usize, spec.lanczos_taps as f64 / 2.0);
        prop_assert!(max_abs_diff(got.as_u8().unwrap(), &want) <= 1);
    }

    #[test]
    fn interpolation_mode_matches_unstretched_oracle(img in image_strategy(16), s in 2u32..5) {
        let mut spec = ResampleSpec::new(Algorithm::Bicubic).with_scale(s);
        spec.antialias = false;
        let got = downscale(&img, &spec).unwrap();
        let (ow, oh) = (img.width().div_ceil(s as usize), img.height().div_ceil(s as usize));
        let want = oracle_resample(&img, Algorithm::Bicubic, 0.0, 1.0, ow, oh, |i| (i as f64 + 0.5) * s as f64 - 0.5);
        prop_assert!(max_abs_diff(got.as_u8().unwrap(), &want) <= 1);
    }

    #[test]
    fn upscale_matches_direct_summation(img in image_strategy(10), s in 1u32..5, taps in prop_oneof![Just(4u32), Just(6), Just(8)]) {
        let got = upscale_lanczos(&img, s, taps).unwrap();
        let want = oracle_upscale(&img, s as usize, taps as f64 / 2.0);
        prop_assert!(max_abs_diff(got.as_u8().unwrap(), &want) <= 1);
    }

    #[test]
    fn mirroring_commutes_with_downscaling(
        blocks_w in 1usize..5, h in 1usize..20, spec in algorithm_strategy(), s in 2u32..5, seed in any::<u64>()
    ) {
        let mut r = rng(seed);
        let img = random_image(&mut r, blocks_w * s as usize, h, 3);
        let spec = spec.with_scale(s);
        let a = downscale(&img.flip_horizontal(), &spec).unwrap();
        let b = downscale(&img, &spec).unwrap().flip_horizontal();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn nearest_mirrors_at_odd_scales(blocks_w in 1usize..5, h in 1usize..12, s in prop_oneof![Just(3u32), Just(5)], seed in any::<u64>()) {
        let mut r = rng(seed);
        let img = random_image(&mut r, blocks_w * s as usize, h, 1);
        let spec = ResampleSpec::new(Algorithm::Nearest).with_scale(s);
        prop_assert_eq!(
            downscale(&img.flip_horizontal(), &spec).unwrap(),
            downscale(&img, &spec).unwrap().flip_horizontal()
        );
    }

    #[test]
    fn ssim_matches_oracle_and_is_symmetric(
        w in 8usize..24, h in 8usize..24, stride in 1usize..4, seed in any::<u64>()
    ) {
        let mut r = rng(seed);
        let x = random_image(&mut r, w, h, 3);
        let y = random_image(&mut r, w, h, 3);
        let p = SsimParams { stride, ..Default::default() };
        let v = ssim(&x, &y, &p).unwrap();
        prop_assert!((v - oracle_ssim(&x, &y, 8, stride, 255.0)).abs() <= 1e-9);
        prop_assert!((v - ssim(&y, &x, &p).unwrap()).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&v));
    }

    #[test]
    fn psnr_falls_as_noise_grows(seed in any::<u64>(), a in 1u8..40, extra in 1u8..40) {
        let mut r = rng(seed);
        let base: Vec<u8> = (0..32 * 32).map(|_| r.gen_range(90..130)).collect();
        let signs: Vec<bool> = (0..base.len()).map(|_| r.gen()).collect();
        let noisy = |amp: u8| {
            let data = base.iter().zip(&signs).map(|(&v, &s)| if s { v + amp } else { v - amp }).collect();
            Image::from_u8(32, 32, 1, data).unwrap()
        };
        let x = Image::from_u8(32, 32, 1, base.clone()).unwrap();
        let small = psnr(&x, &noisy(a), 255.0).unwrap().value();
        let large = psnr(&x, &noisy(a + extra), 255.0).unwrap().value();
        prop_assert!(small > large);
    }

    #[test]
    fn crop_keeps_only_background_outside(img in image_strategy(24), threshold in 1.0f64..120.0) {
        if let Ok((cropped, bbox)) = crop_borders(&img, threshold) {
            prop_assert_eq!(cropped.dimensions(), (bbox.width(), bbox.height()));
            let again = crop_borders(&cropped, threshold).unwrap();
            prop_assert_eq!(again.1, CropBox::full(bbox.width(), bbox.height()));
        }
    }
}

#[test]
fn roundtrip_is_downscale_then_upscale_then_compare() {
    let mut r = rng(5);
    let cfg = RoundTripConfig::default();
    for (w, h) in [(64, 64), (70, 45), (8, 8)] {
        let img = smooth_noise(&mut r, w, h, 3, 3.0);
        for a in Algorithm::NATIVE {
            let spec = ResampleSpec::new(a);
            let score = roundtrip_one(&img, &spec, &cfg).unwrap();
            let small = downscale(&img, &spec).unwrap();
            let up = upscale_lanczos(&small, 8, 4).unwrap();
            let restored = up.crop(CropBox::full(w, h)).unwrap();
            assert_eq!(score.psnr, psnr(&img, &restored, 255.0).unwrap());
            assert_eq!(
                score.ssim,
                ssim(&img, &restored, &SsimParams::default()).unwrap()
            );
        }
    }
}

#[test]
fn roundtrip_report_is_deterministic_and_keeps_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(6);
    let mut csv = String::from("id,path,label\n");
    for i in 0..6 {
        let img = smooth_noise(&mut r, 40 + i, 32, 3, 2.0);
        save_image(
            &img,
            dir.path().join(format!("img{i}.png")),
            FileFormat::Png,
        )
        .unwrap();
        csv.push_str(&format!("img{i},img{i}.png,{}\n", i % 3));
    }
    csv.push_str("broken,missing.png,1\n");
    std::fs::write(dir.path().join("m.csv"), csv).unwrap();
    let m = load_manifest(dir.path().join("m.csv"), Some(Source::Kaggle)).unwrap();
    let specs: Vec<ResampleSpec> = Algorithm::NATIVE
        .iter()
        .map(|&a| ResampleSpec::new(a))
        .collect();
    let cfg = RoundTripConfig::default();
    let a = roundtrip_eval(&m, &specs, &cfg).unwrap();
    let b = roundtrip_eval(&m, &specs, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.rows_csv(), b.rows_csv());
    let ids: Vec<&str> = a.rows.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), 7 * 5);
    assert_eq!(ids[0], "img0");
    assert_eq!(ids[34], "broken");
    assert_eq!(a.rows[34].status, RowStatus::Error);
    let reloaded = load_image(dir.path().join("img3.png")).unwrap();
    let direct = roundtrip_one(&reloaded, &specs[2], &cfg).unwrap();
    assert_eq!(a.rows[3 * 5 + 2].psnr, Some(direct.psnr));
}
