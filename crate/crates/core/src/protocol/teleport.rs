use rand::Rng;

use super::wire::{self, TELEPORT_BITS};
use super::{ProtocolConfig, ProtocolError, SharedPair, Variant};
use crate::channels::{ChannelLog, Network};
use crate::qsim::{Pauli, Statevector};

/// Protocol 1: teleports a one-qubit `message` over `pair`.
///
/// With [`Variant::Mtas`] the anonymous sender measures and broadcasts the
/// correction bits; with [`Variant::MtarInverted`] the receiver teleports to the
/// anonymous holder of the other half and reports the bits over MTAR.
pub fn run_protocol1<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    message: &Statevector,
    pair: Option<&SharedPair>,
    rng: &mut R,
) -> Result<(Statevector, ChannelLog), ProtocolError> {
    config.validate_structure()?;
    if message.num_qubits() != 1 {
        return Err(ProtocolError::MessageSize(message.num_qubits()));
    }
    let pair_state = pair.and_then(|p| p.state.as_ref()).ok_or(ProtocolError::NoPair)?;
    // qubit 0: message, 1: sender half, 2: receiver half
    let joint = message.tensor(pair_state)?;
    let mut net = Network::new(config.n);
    let (s, r) = (config.sender(), config.receiver());

    let partner = match config.variant {
        Variant::Mtas => 1,
        Variant::MtarInverted => 2,
    };
    let (bell, rest) = joint.bell_measure(0, partner, rng)?;
    let payload = wire::encode_bits(bell.bx, bell.bz);
    match config.variant {
        Variant::Mtas => net.broadcast_anonymous(s, TELEPORT_BITS, payload)?,
        Variant::MtarInverted => net.mtar_send(r, s, TELEPORT_BITS, payload)?,
    };
    // the correcting party works from the message it received
    let last = net.log().entries().last().expect("bits were sent");
    let (bx, bz) = wire::decode_bits(&last.payload).expect("well-formed bits");
    let mut out = rest.expect("one qubit remains");
    if bx == 1 {
        out = out.apply_pauli(0, Pauli::X)?;
    }
    if bz == 1 {
        out = out.apply_pauli(0, Pauli::Z)?;
    }
    Ok((out, net.into_log()))
}
