#!/usr/bin/env python3
"""
Script to generate a synthetic demo workspace for the selection pipeline.
"""

import argparse

from napselect.config import OUTPUT_DIR
from napselect.utils import setup_logging
from napselect.pipeline import FixtureGenerator


def main():
    """
    Main function to generate activation dumps, labels and point clouds.
    """
    # Set up argument parsing
    parser = argparse.ArgumentParser(description='Generate a synthetic NapSelect workspace')
    parser.add_argument('--output', type=str, default=str(OUTPUT_DIR / "fixture"),
                        help=f'Output directory (default: {OUTPUT_DIR / "fixture"})')
    parser.add_argument('--frames', type=int, default=12,
                        help='Number of target frames (default: 12)')
    parser.add_argument('--dim', type=int, default=64,
                        help='Activation vector dimension, even (default: 64)')
    parser.add_argument('--clusters', type=int, default=3,
                        help='Number of target pattern clusters (default: 3)')
    parser.add_argument('--beams', type=int, default=64,
                        help='Beams of the synthetic LiDAR (default: 64)')
    parser.add_argument('--seed', type=int, default=0,
                        help='Random seed (default: 0)')
    parser.add_argument('--binary', action='store_true',
                        help='Write the activation dump in the packed NAPD format')

    args = parser.parse_args()

    # Setup logging
    logger = setup_logging()

    generator = FixtureGenerator(seed=args.seed, logger=logger)
    try:
        paths = generator.generate_workspace(
            args.output,
            n_frames=args.frames,
            dim=args.dim,
            n_clusters=args.clusters,
            n_beams=args.beams,
            binary_dump=args.binary,
        )
    except (ValueError, OSError) as e:
        logger.error(f"Fixture generation failed: {e}")
        return 1

    logger.info(f"Fixture generation completed successfully, dump at {paths['dump']}")
    return 0


if __name__ == "__main__":
    exit(main())
