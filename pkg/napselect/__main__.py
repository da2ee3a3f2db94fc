from napselect.cli import main

exit(main())
