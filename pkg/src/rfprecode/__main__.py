from rfprecode.cli import main

raise SystemExit(main())
