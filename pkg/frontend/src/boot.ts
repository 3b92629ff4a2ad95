/** Browser entry point: starts the dashboard on page load. */
import { bootstrap } from "./main.js";

bootstrap();
