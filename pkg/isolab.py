"""Command line entry point of the isomonodromy toolkit."""
import logging

from config import DEBUG_MODE
from handlers import cli

# Configure logging (stderr, so JSON on stdout stays clean)
logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=logging.DEBUG if DEBUG_MODE else logging.INFO
)
logger = logging.getLogger(__name__)


def main():
    """Run the command group."""
    logger.debug("Starting isolab")
    cli(prog_name='isolab')


if __name__ == '__main__':
    main()
