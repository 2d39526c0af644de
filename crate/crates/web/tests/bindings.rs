use jinv_web::{gp_rows, masked, run_calibration};

#[test]
fn calibration_picks_a_listed_parameter() {
    let c = run_calibration(48, 0.1, "nlm", &[0.04, 0.08, 0.12], 0).unwrap();
    assert_eq!(c.ss_loss().len(), 3);
    assert!(c.best() < 3);
    assert_eq!(c.noisy().len(), 48 * 48);
    assert!(c.denoised_psnr() > c.noisy_psnr());
    assert!(c.mixed_psnr() > c.denoised_psnr());
    assert!((0.0..=1.0).contains(&c.lambda()));
}

#[test]
fn calibration_rejects_fractional_radius() {
    assert!(run_calibration(32, 0.1, "median", &[1.5], 0).is_err());
    assert!(run_calibration(32, 0.1, "bilateral", &[1.0], 0).is_err());
}

#[test]
fn gp_rows_order_the_predictors() {
    let r = gp_rows(5, 0.5, &[1.0, 2.0]).unwrap();
    assert_eq!(r.len(), 4);
    assert!(r[0] >= r[1] && r[2] >= r[3]);
    assert!(gp_rows(5, 0.0, &[1.0]).is_err());
}

#[test]
fn masked_output_ignores_the_pixel_itself() {
    let (w, h) = (12, 10);
    let mut px: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
    let a = masked(&px, w, h, "wavelet", 0.1, 3).unwrap();
    px[50] += 5.0;
    let b = masked(&px, w, h, "wavelet", 0.1, 3).unwrap();
    assert!((a[50] - b[50]).abs() < 1e-12);
    assert!(masked(&px, w, h + 1, "wavelet", 0.1, 3).is_err());
}
