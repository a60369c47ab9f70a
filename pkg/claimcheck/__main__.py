from claimcheck.main import main

raise SystemExit(main())
