from .commands import (
    bounds_command,
    bpsk_command,
    cube_ell_command,
    growth_command,
    mc_volume_command,
    subconv_command,
    v1_command,
)


def register_commands(cli):
    v1_command(cli)
    growth_command(cli)
    bounds_command(cli)
    cube_ell_command(cli)
    mc_volume_command(cli)
    subconv_command(cli)
    bpsk_command(cli)
