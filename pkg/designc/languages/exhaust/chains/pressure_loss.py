"""
stand-in for a pressure-loss simulation of the SCR catalyst

usage: pressure_loss.py INPUT OUTPUT

reads the design graph extract and writes {"pressureLoss": "<value> [Pa]"}; the loss
grows with the mass flow and falls with the catalyst volume
"""
import json
import sys

LOSS_COEFFICIENT = 100.0  # Pa * m^3 * s / kg


def pressure_loss(in_flow, catalyst_volume):
    return LOSS_COEFFICIENT * in_flow / catalyst_volume


if __name__ == '__main__':
    with open(sys.argv[1]) as f:
        extract = json.load(f)
    nodes = extract['nodes']
    if len(nodes) != 1:
        sys.stderr.write("expected one SCR system, got %d\n" % len(nodes))
        sys.exit(1)
    attrs = nodes[0]['attrs']
    with open(sys.argv[2], 'w') as f:
        json.dump({'pressureLoss': "%r [Pa]" % pressure_loss(attrs['inFlow'], attrs['catalystVolume'])}, f)
