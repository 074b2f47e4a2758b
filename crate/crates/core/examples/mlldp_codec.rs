//! Encode a discovery frame, show its bytes, and decode it back.

use std::net::Ipv4Addr;

use mdsdn::messenger::{decode_mlldp, encode_mlldp, MlldpFrame};
use mdsdn::model::DomainId;

fn main() {
    let frame = MlldpFrame {
        controller_id: DomainId::new("A").unwrap(),
        switch_id: 1,
        switch_port: 2,
        server_ip: Ipv4Addr::new(10, 0, 0, 1),
        server_port: 5672,
        server_name: "ctl-A".into(),
    };
    let bytes = encode_mlldp(&frame).expect("valid frame");
    for (i, row) in bytes.chunks(16).enumerate() {
        let hex: Vec<String> = row.iter().map(|b| format!("{b:02x}")).collect();
        println!("{:04x}  {}", i * 16, hex.join(" "));
    }
    let back = decode_mlldp(&bytes).expect("decodes");
    println!("decoded: {back:?}");
    assert_eq!(back, frame);

    let mut tampered = bytes;
    tampered[19] = 0x42;
    println!("tampered subtype: {}", decode_mlldp(&tampered).unwrap_err());
}
