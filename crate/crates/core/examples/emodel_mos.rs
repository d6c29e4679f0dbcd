//! MOS against one-way delay for both codecs, with the QoE band it falls in.

use handoff_lab::qoe::{mos_from_delay, Codec, QuantizationScheme};

fn main() -> handoff_lab::Result<()> {
    let scheme = QuantizationScheme::roaming();
    println!("owd_ms  loss  codec  mos    state");
    for loss in [0.0, 0.05] {
        for owd_ms in [20.0, 100.0, 150.0, 250.0, 400.0, 600.0] {
            for codec in [Codec::G711, Codec::G729] {
                let mos = mos_from_delay(owd_ms / 1000.0, loss, &codec.profile())?;
                println!(
                    "{owd_ms:>6}  {loss:.2}  {codec}   {:.3}  {}",
                    mos.value(),
                    scheme.quantize(mos)
                );
            }
        }
    }
    Ok(())
}
